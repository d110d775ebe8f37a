#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "spadsr/baseline.hpp"
#include "spadsr/rng.hpp"
#include "support/oracles.hpp"

using namespace spadsr;

namespace {

Image random_frame(int h, int w, std::uint64_t seed) {
  RandomStream rng(seed, 0xb1c);
  Image f(h, w);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = rng.next_double();
  return f;
}

}  // namespace

TEST_CASE("the cubic kernel interpolates") {
  CHECK(cubic_kernel(0.0) == 1.0);
  CHECK(cubic_kernel(1.0) == 0.0);
  CHECK(cubic_kernel(-1.0) == 0.0);
  CHECK(cubic_kernel(2.0) == 0.0);
  CHECK(cubic_kernel(-2.0) == 0.0);
  CHECK(cubic_kernel(2.5) == 0.0);

  // Partition of unity at arbitrary phase.
  for (double f : {0.0, 0.1, 0.25, 0.5, 0.9}) {
    double sum = 0.0;
    for (int k = -1; k <= 2; ++k) sum += cubic_kernel(f - k);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("constant frames upscale exactly") {
  const Image c = Image::Constant(4, 6, 0.37);
  const Image up = bicubic_upscale(c, 4);
  CHECK(up.rows() == 16);
  CHECK(up.cols() == 24);
  CHECK((up - 0.37).abs().maxCoeff() < 1e-12);

  const Image same = bicubic_upscale(c, 1);
  CHECK((same - c).abs().maxCoeff() < 1e-12);
}

TEST_CASE("separable implementation matches the direct double-sum oracle") {
  const Image src = random_frame(8, 8, 1);
  const Image up = bicubic_upscale(src, 4);
  const Image ref = oracle::bicubic(src, 4);
  CHECK((up - ref).abs().maxCoeff() < 1e-10);

  const Image src2 = random_frame(5, 9, 2);
  const Image up2 = bicubic_upscale(src2, 8);
  const Image ref2 = oracle::bicubic(src2, 8);
  CHECK((up2 - ref2).abs().maxCoeff() < 1e-10);
}

TEST_CASE("upscaling is linear") {
  const Image x = random_frame(6, 6, 3);
  const Image y = random_frame(6, 6, 4);
  const double a = 1.3, b = -0.4;
  const Image mix = a * x + b * y;
  const Image lhs = bicubic_upscale(mix, 4);
  const Image rhs = a * bicubic_upscale(x, 4) + b * bicubic_upscale(y, 4);
  CHECK((lhs - rhs).abs().maxCoeff() < 1e-10);
}

TEST_CASE("float and double instantiations agree to float precision") {
  const Image src = random_frame(6, 6, 5);
  const ImageF srcf = src.cast<float>();
  const Image up = bicubic_upscale(src, 4);
  const ImageF upf = bicubic_upscale(srcf, 4);
  CHECK((up.cast<float>() - upf).abs().maxCoeff() < 1e-5f);
}

TEST_CASE("clamped variant stays within [0,1]") {
  // Step edges overshoot with Catmull-Rom; the clamped variant cuts them.
  Image step(4, 8);
  step.setZero();
  step.rightCols(4).setConstant(1.0);
  const Image raw = bicubic_upscale(step, 4);
  CHECK(raw.maxCoeff() > 1.0);   // overshoot exists
  CHECK(raw.minCoeff() < 0.0);

  const Image clamped = bicubic_upscale_clamped(step, 4);
  CHECK(clamped.maxCoeff() <= 1.0);
  CHECK(clamped.minCoeff() >= 0.0);

  CHECK_THROWS_AS(bicubic_upscale(step, 0), std::invalid_argument);
}

TEST_CASE("sequence helper upscales frame by frame") {
  std::vector<Image> frames{random_frame(4, 4, 6), random_frame(4, 4, 7)};
  const auto up = bicubic_sequence(frames, 4);
  REQUIRE(up.size() == 2);
  for (std::size_t t = 0; t < 2; ++t) {
    CHECK(up[t].rows() == 16);
    const Image direct = bicubic_upscale_clamped(frames[t], 4);
    CHECK((up[t] - direct).abs().maxCoeff() == 0.0);
  }
}
