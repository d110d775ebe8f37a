#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "spadsr/metrics.hpp"
#include "spadsr/rng.hpp"
#include "support/oracles.hpp"

using namespace spadsr;

namespace {

Image random_frame(int h, int w, std::uint64_t seed) {
  RandomStream rng(seed, 0x3e7);
  Image f(h, w);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = rng.next_double();
  return f;
}

}  // namespace

TEST_CASE("psnr identities") {
  const Image gt = random_frame(6, 8, 1);
  CHECK(std::isinf(psnr(gt, gt)));
  CHECK(psnr(gt, gt) > 0);

  const Image off = gt + 0.1;  // uniform |error| 0.1 -> RMSE 0.1 -> 20 dB
  CHECK(psnr(off, gt) == doctest::Approx(20.0).epsilon(1e-12));

  CHECK_THROWS_AS(psnr(gt, random_frame(6, 9, 2)), std::invalid_argument);
}

TEST_CASE("psnr matches the double-loop MSE oracle") {
  const Image a = random_frame(16, 12, 3);
  const Image b = random_frame(16, 12, 4);
  const double expect = 20.0 * std::log10(1.0 / std::sqrt(oracle::mse(a, b)));
  CHECK(psnr(a, b) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(psnr(a, b) == psnr(b, a));  // symmetry
}

TEST_CASE("psnr decreases as noise grows") {
  const Image gt = random_frame(8, 8, 5);
  double prev = std::numeric_limits<double>::infinity();
  for (double amp : {0.01, 0.05, 0.1, 0.2}) {
    const double cur = psnr(Image(gt + amp), gt);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("ssim identities") {
  const Image gt = random_frame(7, 9, 6);
  CHECK(ssim(gt, gt) == doctest::Approx(1.0).epsilon(1e-12));

  const Image zero = Image::Zero(4, 4);
  const Image one = Image::Constant(4, 4, 1.0);
  // Zero-variance frames: (2*0*1 + 0.0001) / (0 + 1 + 0.0001), second factor 1.
  CHECK(ssim(zero, one) == doctest::Approx(0.0001 / 1.0001).epsilon(1e-12));
  CHECK(ssim(zero, one) == doctest::Approx(9.999000099990002e-05).epsilon(1e-12));

  CHECK_THROWS_AS(ssim(gt, Image::Zero(2, 2)), std::invalid_argument);
}

TEST_CASE("ssim matches the two-pass moment oracle") {
  const Image a = random_frame(10, 14, 7);
  const Image b = random_frame(10, 14, 8);
  CHECK(ssim(a, b) == doctest::Approx(oracle::ssim(a, b)).epsilon(1e-12));
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));
  CHECK(ssim(a, b) > -1.0);
  CHECK(ssim(a, b) < 1.0);
}

TEST_CASE("temporal coherence counts flicker over static ground truth") {
  const Image gt = Image::Constant(4, 4, 0.5);

  // Perfect reconstruction: no flicker anywhere.
  CHECK(temporal_coherence(gt, gt, gt, gt) == 0);

  // SR flickers at exactly three pixels.
  Image sr_t = Image::Constant(4, 4, 0.5);
  Image sr_next = sr_t;
  sr_next(0, 0) += 0.2;
  sr_next(1, 2) -= 0.1;
  sr_next(3, 3) += 0.05;
  CHECK(temporal_coherence(gt, gt, sr_t, sr_next) == 3);

  // tau suppresses sub-threshold flicker.
  CHECK(temporal_coherence(gt, gt, sr_t, sr_next, 0.06) == 2);
  CHECK(temporal_coherence(gt, gt, sr_t, sr_next, 0.5) == 0);

  // Moving ground truth masks the moving pixel out of the count.
  Image gt_next = gt;
  gt_next(0, 0) = 0.9;
  CHECK(temporal_coherence(gt, gt_next, sr_t, sr_next) == 2);

  CHECK_THROWS_AS(temporal_coherence(gt, Image::Zero(2, 2), sr_t, sr_next),
                  std::invalid_argument);
}

TEST_CASE("error map is the absolute difference") {
  const Image gt = random_frame(5, 5, 9);
  CHECK((error_map(gt, gt) == 0.0).all());

  Image bits(2, 2), flipped(2, 2);
  bits << 0.0, 1.0, 1.0, 0.0;
  flipped = 1.0 - bits;
  CHECK((error_map(flipped, bits) == 1.0).all());

  const Image sr = random_frame(5, 5, 10);
  const Image em = error_map(sr, gt);
  CHECK(em.minCoeff() >= 0.0);
  const double mse_from_map = em.square().mean();
  CHECK(mse_from_map == doctest::Approx(oracle::mse(sr, gt)).epsilon(1e-12));
}

TEST_CASE("evaluate_sequence aggregates per-frame metrics") {
  std::vector<Image> gt, sr;
  for (int t = 0; t < 3; ++t) {
    gt.push_back(Image::Constant(4, 4, 0.5));
    sr.push_back(Image::Constant(4, 4, 0.5));
  }
  sr[1](0, 0) = 0.7;  // one flickering pixel in both adjacent pairs

  const MetricsReport rep = evaluate_sequence(sr, gt, 1e-6, 2.0);
  REQUIRE(rep.psnr_frames.size() == 3);
  REQUIRE(rep.tc_frames.size() == 2);
  CHECK(std::isinf(rep.psnr_frames[0]));
  CHECK(std::isfinite(rep.psnr_frames[1]));
  CHECK(rep.tc_frames[0] == 1);
  CHECK(rep.tc_frames[1] == 1);
  CHECK(rep.mean_tc == doctest::Approx(1.0));
  CHECK(rep.throughput_fps == doctest::Approx(1.5));  // 3 frames / 2 s
  CHECK(std::isinf(rep.mean_psnr));  // mean over frames includes the inf frame

  CHECK(ssim(sr[0], gt[0]) == doctest::Approx(rep.ssim_frames[0]).epsilon(1e-15));
}

TEST_CASE("metric formatting serializes infinities as inf") {
  CHECK(format_metric(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_metric(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(format_metric(20.0) == "20");
  CHECK(format_metric(0.001) == "0.001");
}

TEST_CASE("metrics CSV layout") {
  MetricsReport rep;
  rep.psnr_frames = {std::numeric_limits<double>::infinity(), 20.0};
  rep.ssim_frames = {1.0, 0.5};
  rep.tc_frames = {2};
  std::ostringstream os;
  write_metrics_csv(os, "seq_000", "bicubic", rep, "0123456789abcdef", true);
  write_metrics_csv(os, "seq_000", "net", rep, "0123456789abcdef", false);
  const std::string text = os.str();

  CHECK(text.find("# config-hash=0123456789abcdef\n") == 0);
  CHECK(text.find("sequence,frame,method,psnr,ssim,tc\n") != std::string::npos);
  CHECK(text.find("seq_000,0,bicubic,inf,1,2\n") != std::string::npos);
  CHECK(text.find("seq_000,1,bicubic,20,0.5,") != std::string::npos);
  CHECK(text.find("seq_000,0,net,inf,1,2\n") != std::string::npos);
  // Header appears exactly once.
  CHECK(text.find("sequence,frame,method") ==
        text.rfind("sequence,frame,method"));
}
