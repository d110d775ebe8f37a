#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "spadsr/rng.hpp"
#include "spadsr/tensor.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace spadsr;
using namespace spadsr::ad;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, bool requires_grad = false,
                     double lo = -1.0, double hi = 1.0) {
  RandomStream rng(seed, 0x7e57);
  Eigen::ArrayXd data(numel(shape));
  for (Eigen::Index i = 0; i < data.size(); ++i)
    data[i] = lo + (hi - lo) * rng.next_double();
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

std::vector<double> to_vec(const Tensor& t) {
  return {t.value().data(), t.value().data() + t.size()};
}

double max_abs_diff(const Tensor& t, const std::vector<double>& ref) {
  REQUIRE(t.size() == static_cast<Eigen::Index>(ref.size()));
  double m = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i)
    m = std::max(m, std::abs(t.value()[i] - ref[i]));
  return m;
}

}  // namespace

TEST_CASE("tensor construction and shape plumbing") {
  const Tensor z = Tensor::zeros({2, 3});
  CHECK(z.size() == 6);
  CHECK((z.value() == 0.0).all());
  CHECK_FALSE(z.requires_grad());

  const Tensor c = Tensor::constant({4}, 2.5, true);
  CHECK(c.requires_grad());
  CHECK(c.value()[3] == 2.5);

  CHECK_THROWS_AS(Tensor::from_data({2, 2}, Eigen::ArrayXd::Zero(3)),
                  std::invalid_argument);
  CHECK_THROWS_AS(Tensor::zeros({2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor::zeros({2, 2}).scalar(), std::invalid_argument);

  Image img(2, 3);
  img << 1, 2, 3, 4, 5, 6;
  const Tensor t = Tensor::from_image(img);
  CHECK(t.shape() == Shape{1, 2, 3, 1});
  const Image back = t.to_image();
  CHECK((back == img).all());
}

TEST_CASE("conv3d with an identity kernel reproduces the input") {
  const Tensor x = random_tensor({3, 4, 5, 1}, 1);
  Tensor w = Tensor::zeros({3, 3, 3, 1, 1});
  w.value()[((1 * 3 + 1) * 3 + 1)] = 1.0;  // center tap
  const Tensor b = Tensor::zeros({1});
  const Tensor y = conv3d(x, w, b, Pad::Replicate, Pad::Zero);
  CHECK(max_abs_diff(y, to_vec(x)) < 1e-15);
}

TEST_CASE("all-ones 3x3x3 kernel on constant 2.0 sums to 54 with replicate padding") {
  const Tensor x = Tensor::constant({3, 4, 4, 1}, 2.0);
  const Tensor w = Tensor::constant({3, 3, 3, 1, 1}, 1.0);
  const Tensor b = Tensor::zeros({1});
  const Tensor y = conv3d(x, w, b, Pad::Replicate, Pad::Replicate);
  for (Eigen::Index i = 0; i < y.size(); ++i)
    CHECK(y.value()[i] == doctest::Approx(54.0).epsilon(1e-12));
}

TEST_CASE("conv3d matches the direct 7-loop reference") {
  const Tensor x = random_tensor({4, 5, 6, 2}, 2);
  const Tensor w = random_tensor({3, 3, 3, 2, 3}, 3);
  const Tensor b = random_tensor({3}, 4);

  struct Mode {
    Pad t, s;
    bool rt, rs;
  };
  for (const Mode m : {Mode{Pad::Replicate, Pad::Zero, true, false},
                       Mode{Pad::Zero, Pad::Zero, false, false},
                       Mode{Pad::Replicate, Pad::Replicate, true, true}}) {
    const Tensor y = conv3d(x, w, b, m.t, m.s);
    CHECK(y.shape() == Shape{4, 5, 6, 3});
    const auto ref = oracle::conv3d(to_vec(x), 4, 5, 6, 2, to_vec(w), 3, 3, 3, 3,
                                    to_vec(b), m.rt, m.rs);
    CHECK(max_abs_diff(y, ref) < 1e-12);
  }
}

TEST_CASE("pointwise 1x1x1 convolution matches the reference") {
  const Tensor x = random_tensor({3, 4, 5, 4}, 5);
  const Tensor w = random_tensor({1, 1, 1, 4, 2}, 6);
  const Tensor b = random_tensor({2}, 7);
  const Tensor y = conv3d(x, w, b, Pad::Replicate, Pad::Zero);
  const auto ref =
      oracle::conv3d(to_vec(x), 3, 4, 5, 4, to_vec(w), 1, 1, 1, 2, to_vec(b), true, false);
  CHECK(max_abs_diff(y, ref) < 1e-12);
}

TEST_CASE("mixed kernel extents are supported when odd") {
  const Tensor x = random_tensor({2, 4, 4, 2}, 8);
  const Tensor w = random_tensor({1, 3, 3, 2, 2}, 9);
  const Tensor b = Tensor::zeros({2});
  const Tensor y = conv3d(x, w, b, Pad::Replicate, Pad::Zero);
  const auto ref =
      oracle::conv3d(to_vec(x), 2, 4, 4, 2, to_vec(w), 1, 3, 3, 2, to_vec(b), true, false);
  CHECK(max_abs_diff(y, ref) < 1e-12);

  CHECK_THROWS_AS(conv3d(x, random_tensor({2, 3, 3, 2, 2}, 10), b, Pad::Zero, Pad::Zero),
                  std::invalid_argument);
  CHECK_THROWS_AS(conv3d(x, random_tensor({1, 3, 3, 3, 2}, 11), b, Pad::Zero, Pad::Zero),
                  std::invalid_argument);  // channel mismatch
}

TEST_CASE("conv3d is linear in its input") {
  const Tensor x = random_tensor({2, 4, 4, 2}, 12);
  const Tensor y = random_tensor({2, 4, 4, 2}, 13);
  const Tensor w = random_tensor({3, 3, 3, 2, 2}, 14);
  const Tensor b = Tensor::zeros({2});
  const double a = 1.7, bb = -0.6;

  Eigen::ArrayXd mix = a * x.value() + bb * y.value();
  const Tensor xm = Tensor::from_data({2, 4, 4, 2}, std::move(mix));
  const Tensor lhs = conv3d(xm, w, b, Pad::Replicate, Pad::Zero);
  const Tensor cx = conv3d(x, w, b, Pad::Replicate, Pad::Zero);
  const Tensor cy = conv3d(y, w, b, Pad::Replicate, Pad::Zero);
  const Eigen::ArrayXd rhs = a * cx.value() + bb * cy.value();
  CHECK((lhs.value() - rhs).abs().maxCoeff() < 1e-10);
}

TEST_CASE("batch_norm_train standardizes each channel") {
  const Tensor x = random_tensor({2, 3, 4, 3}, 15, false, -2.0, 5.0);
  const Tensor gamma = Tensor::constant({3}, 1.0);
  const Tensor beta = Tensor::zeros({3});
  BnStats stats;
  const Tensor y = batch_norm_train(x, gamma, beta, 1e-5, &stats);

  const Eigen::Index rows = x.size() / 3;
  for (int c = 0; c < 3; ++c) {
    double mean = 0.0, var = 0.0;
    for (Eigen::Index r = 0; r < rows; ++r) mean += y.value()[r * 3 + c];
    mean /= static_cast<double>(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double d = y.value()[r * 3 + c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(rows);
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(var - 1.0) < 1e-4);  // eps shrinks variance slightly

    // Reported batch statistics are the population moments of x.
    double xmean = 0.0;
    for (Eigen::Index r = 0; r < rows; ++r) xmean += x.value()[r * 3 + c];
    xmean /= static_cast<double>(rows);
    CHECK(stats.mean[c] == doctest::Approx(xmean).epsilon(1e-12));
  }
}

TEST_CASE("batch_norm handles constant channels and affine parameters") {
  Tensor x = Tensor::constant({1, 2, 2, 2}, 3.0);
  Tensor gamma = Tensor::constant({2}, 2.0);
  Tensor beta = Tensor::constant({2}, 0.5);
  const Tensor y = batch_norm_train(x, gamma, beta, 1e-5);
  // Zero variance: normalized value is 0, output collapses to beta.
  for (Eigen::Index i = 0; i < y.size(); ++i)
    CHECK(y.value()[i] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("batch_norm_eval applies fixed statistics") {
  const Tensor x = random_tensor({1, 2, 3, 2}, 16);
  const Tensor gamma = Tensor::constant({2}, 1.5);
  const Tensor beta = Tensor::constant({2}, -0.25);
  Eigen::ArrayXd mean(2), var(2);
  mean << 0.3, -0.1;
  var << 4.0, 0.25;
  const Tensor y = batch_norm_eval(x, gamma, beta, mean, var, 1e-5);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const int c = static_cast<int>(i % 2);
    const double expect =
        1.5 * (x.value()[i] - mean[c]) / std::sqrt(var[c] + 1e-5) - 0.25;
    CHECK(y.value()[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("relu clips negatives and passes positives") {
  Tensor x = Tensor::from_data({4}, Eigen::ArrayXd(4));
  x.value() << -1.0, 0.0, 2.0, -0.5;
  const Tensor y = relu(x);
  CHECK(y.value()[0] == 0.0);
  CHECK(y.value()[1] == 0.0);
  CHECK(y.value()[2] == 2.0);
  CHECK(y.value()[3] == 0.0);
}

TEST_CASE("softmax over tap groups") {
  const Tensor u = Tensor::constant({1, 1, 1, 25}, 3.7);
  const Tensor su = softmax_last(u, 25);
  for (Eigen::Index i = 0; i < 25; ++i)
    CHECK(su.value()[i] == doctest::Approx(0.04).epsilon(1e-12));

  const Tensor x = random_tensor({1, 2, 1, 8}, 17, false, -3.0, 3.0);
  const Tensor y = softmax_last(x, 4);  // two pixels x two groups of 4
  for (int g = 0; g < 4; ++g) {
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) sum += y.value()[g * 4 + i];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Invariant under a constant shift of the logits.
  Tensor shifted = Tensor::from_data({1, 2, 1, 8}, x.value() + 123.0);
  const Tensor ys = softmax_last(shifted, 4);
  CHECK((y.value() - ys.value()).abs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(softmax_last(x, 3), std::invalid_argument);
}

TEST_CASE("depth_to_space maps channel c to offset (c mod r, c div r)") {
  Eigen::ArrayXd vals(16);
  std::iota(vals.data(), vals.data() + 16, 0.0);
  const Tensor x = Tensor::from_data({1, 1, 1, 16}, std::move(vals));
  const Tensor y = depth_to_space(x, 4);
  CHECK(y.shape() == Shape{1, 4, 4, 1});
  for (int yy = 0; yy < 4; ++yy)
    for (int xx = 0; xx < 4; ++xx)
      CHECK(y.value()[yy * 4 + xx] == doctest::Approx(4.0 * yy + xx));

  // Bijection: the multiset of values is preserved.
  const Tensor z = random_tensor({2, 3, 2, 8}, 18);
  const Tensor zd = depth_to_space(z, 2);
  CHECK(zd.shape() == Shape{2, 6, 4, 2});
  Eigen::ArrayXd a = z.value(), bvals = zd.value();
  std::sort(a.data(), a.data() + a.size());
  std::sort(bvals.data(), bvals.data() + bvals.size());
  CHECK((a - bvals).abs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(depth_to_space(random_tensor({1, 2, 2, 6}, 19), 2),
                  std::invalid_argument);
}

TEST_CASE("slice, concat, add, mul, sum, clamp behave elementwise") {
  const Tensor x = random_tensor({3, 2, 2, 2}, 20);
  const Tensor s = slice_time(x, 1);
  CHECK(s.shape() == Shape{1, 2, 2, 2});
  for (Eigen::Index i = 0; i < s.size(); ++i)
    CHECK(s.value()[i] == x.value()[8 + i]);

  const Tensor a = random_tensor({1, 2, 2, 2}, 21);
  const Tensor b = random_tensor({1, 2, 2, 3}, 22);
  const Tensor cat = concat_channels(a, b);
  CHECK(cat.shape() == Shape{1, 2, 2, 5});
  CHECK(cat.value()[0] == a.value()[0]);
  CHECK(cat.value()[2] == b.value()[0]);
  CHECK(cat.value()[5] == a.value()[2]);

  const Tensor sum = add(a, a);
  CHECK((sum.value() - 2.0 * a.value()).abs().maxCoeff() == 0.0);
  const Tensor prod = mul(a, a);
  CHECK((prod.value() - a.value().square()).abs().maxCoeff() == 0.0);
  CHECK(sum_all(a).scalar() == doctest::Approx(a.value().sum()).epsilon(1e-12));

  Tensor c = Tensor::from_data({3}, Eigen::ArrayXd(3));
  c.value() << -0.5, 0.25, 1.5;
  const Tensor cc = clamp01(c);
  CHECK(cc.value()[0] == 0.0);
  CHECK(cc.value()[1] == 0.25);
  CHECK(cc.value()[2] == 1.0);

  CHECK_THROWS_AS(add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(slice_time(x, 3), std::invalid_argument);
}

TEST_CASE("backward of a linear form recovers the data exactly") {
  const Tensor x = random_tensor({2, 3}, 23);
  Tensor w = random_tensor({2, 3}, 24, true);
  const Tensor loss = sum_all(mul(w, x));
  const GradStore g = backward(loss);
  CHECK((g[w] - x.value()).abs().maxCoeff() == 0.0);
}

TEST_CASE("relu subgradient is 1 for positive, 0 for non-positive inputs") {
  Tensor x = Tensor::from_data({3}, Eigen::ArrayXd(3), true);
  x.value() << -2.0, 0.0, 3.0;
  const GradStore g = backward(sum_all(relu(x)));
  CHECK(g[x][0] == 0.0);
  CHECK(g[x][1] == 0.0);
  CHECK(g[x][2] == 1.0);
}

TEST_CASE("shared subgraphs are visited once and accumulate correctly") {
  Tensor x = Tensor::constant({2}, 1.0, true);
  Tensor unused = Tensor::constant({2}, 1.0, true);  // alive but unreachable
  const Tensor a = add(x, x);      // used twice below
  const Tensor b = add(a, a);      // dx should be 4, not 8
  const Tensor loss = sum_all(b);
  const GradStore g = backward(loss);
  CHECK(g[x][0] == 4.0);
  CHECK(g[x][1] == 4.0);

  CHECK_FALSE(g.has(unused.node().get()));
  CHECK_THROWS_AS(g[unused], std::invalid_argument);
}

TEST_CASE("backward requires a scalar loss") {
  Tensor x = Tensor::constant({2}, 1.0, true);
  CHECK_THROWS_AS(backward(add(x, x)), std::invalid_argument);
}

TEST_CASE("gradient check: conv3d") {
  Tensor x = random_tensor({2, 3, 3, 2}, 30, true);
  Tensor w = random_tensor({3, 3, 3, 2, 2}, 31, true, -0.5, 0.5);
  Tensor b = random_tensor({2}, 32, true);
  for (Pad ps : {Pad::Zero, Pad::Replicate}) {
    auto fwd = [&] {
      const Tensor y = conv3d(x, w, b, Pad::Replicate, ps);
      return sum_all(mul(y, y));
    };
    const auto rep = gradcheck::check(fwd, {x, w, b});
    CHECK(rep.max_rel_err < 1e-6);
  }
}

TEST_CASE("gradient check: batch norm, train and eval") {
  Tensor x = random_tensor({1, 2, 3, 2}, 33, true, 0.5, 2.5);
  Tensor gamma = random_tensor({2}, 34, true, 0.5, 1.5);
  Tensor beta = random_tensor({2}, 35, true);
  {
    auto fwd = [&] {
      const Tensor y = batch_norm_train(x, gamma, beta, 1e-5);
      return sum_all(mul(y, y));
    };
    const auto rep = gradcheck::check(fwd, {x, gamma, beta});
    CHECK(rep.max_rel_err < 1e-5);
  }
  {
    Eigen::ArrayXd mean(2), var(2);
    mean << 0.2, 1.0;
    var << 1.5, 0.7;
    auto fwd = [&] {
      const Tensor y = batch_norm_eval(x, gamma, beta, mean, var, 1e-5);
      return sum_all(mul(y, y));
    };
    const auto rep = gradcheck::check(fwd, {x, gamma, beta});
    CHECK(rep.max_rel_err < 1e-6);
  }
}

TEST_CASE("gradient check: softmax and depth_to_space") {
  Tensor x = random_tensor({1, 2, 1, 8}, 36, true, -2.0, 2.0);
  const Tensor mixer = random_tensor({1, 2, 1, 8}, 37);
  auto fwd_sm = [&] { return sum_all(mul(softmax_last(x, 4), mixer)); };
  CHECK(gradcheck::check(fwd_sm, {x}).max_rel_err < 1e-6);

  Tensor z = random_tensor({1, 2, 2, 4}, 38, true);
  const Tensor mixer2 = random_tensor({1, 4, 4, 1}, 39);
  auto fwd_d2s = [&] { return sum_all(mul(depth_to_space(z, 2), mixer2)); };
  CHECK(gradcheck::check(fwd_d2s, {z}).max_rel_err < 1e-6);
}

TEST_CASE("gradient check: dynamic filters composed with softmax") {
  const int r = 2, kf = 3;
  Tensor logits = random_tensor({1, 2, 3, r * r * kf * kf}, 40, true, -1.0, 1.0);
  Tensor frame = random_tensor({1, 2, 3, 1}, 41, true);
  auto fwd = [&] {
    const Tensor w = softmax_last(logits, kf * kf);
    const Tensor y = dynamic_filter_apply(w, frame, r, kf);
    return sum_all(mul(y, y));
  };
  const auto rep = gradcheck::check(fwd, {logits, frame});
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("gradient check: clamp01 and huber away from their kinks") {
  Tensor x = Tensor::from_data({4}, Eigen::ArrayXd(4), true);
  x.value() << -0.4, 0.3, 0.7, 1.6;  // all at least 0.3 from a clamp boundary
  const Tensor mixer = random_tensor({4}, 42);
  auto fwd = [&] { return sum_all(mul(clamp01(x), mixer)); };
  CHECK(gradcheck::check(fwd, {x}).max_rel_err < 1e-6);

  Eigen::ArrayXd target(4);
  target << 0.0, 0.0, 0.0, 0.0;
  Tensor p = Tensor::from_data({4}, Eigen::ArrayXd(4), true);
  p.value() << -0.5, 0.004, -0.003, 0.8;  // mixes quadratic and linear branches
  auto fwd_h = [&] { return huber_loss(p, target, 0.01); };
  CHECK(gradcheck::check(fwd_h, {p}).max_rel_err < 1e-5);
}

TEST_CASE("gradient check: composition across layers") {
  Tensor x = random_tensor({3, 2, 2, 1}, 43, true);
  Tensor w1 = random_tensor({3, 3, 3, 1, 2}, 44, true, -0.5, 0.5);
  Tensor b1 = random_tensor({2}, 45, true);
  Tensor gamma = random_tensor({2}, 46, true, 0.8, 1.2);
  Tensor beta = random_tensor({2}, 47, true);
  Tensor w2 = random_tensor({1, 1, 1, 2, 4}, 48, true, -0.5, 0.5);
  Tensor b2 = random_tensor({4}, 49, true);
  auto fwd = [&] {
    Tensor h = conv3d(x, w1, b1, Pad::Replicate, Pad::Zero);
    h = batch_norm_train(h, gamma, beta, 1e-5);
    h = relu(h);
    h = conv3d(h, w2, b2, Pad::Replicate, Pad::Zero);
    h = slice_time(h, 1);
    const Tensor up = depth_to_space(h, 2);
    return sum_all(mul(up, up));
  };
  const auto rep = gradcheck::check(fwd, {x, w1, b1, gamma, beta, w2, b2});
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("huber loss values on both branches") {
  Eigen::ArrayXd target(1);
  target << 0.0;
  Tensor p = Tensor::from_data({1}, Eigen::ArrayXd(1));

  p.value() << 0.005;  // quadratic branch: 0.5 * err^2
  CHECK(huber_loss(p, target, 0.01).scalar() == doctest::Approx(1.25e-5).epsilon(1e-12));

  p.value() << 0.02;  // linear branch: delta * (|err| - delta/2)
  CHECK(huber_loss(p, target, 0.01).scalar() == doctest::Approx(1.5e-4).epsilon(1e-12));

  p.value() << 0.01;  // continuity at the kink
  CHECK(huber_loss(p, target, 0.01).scalar() == doctest::Approx(5e-5).epsilon(1e-12));
}
