#include "spadsr/spad.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <thread>

#include "spadsr/errors.hpp"
#include "spadsr/rng.hpp"

namespace spadsr {

namespace {

constexpr int kBlock = 4;  // HR subpixels per LR pixel, per axis

void deposit_pulse(double* bins, int n_bins, double amount, double center,
                   double sigma, double* deposited) {
  if (sigma < 1e-9) {
    // Delta pulse at the nearest bin; mass outside the range is lost.
    const auto j = static_cast<long>(std::floor(center + 0.5));
    if (j >= 0 && j < n_bins) {
      bins[j] += amount;
      *deposited += amount;
    }
    return;
  }
  const double radius = 3.0 * sigma;
  const auto j0 = static_cast<long>(std::ceil(center - radius));
  const auto j1 = static_cast<long>(std::floor(center + radius));
  if (j1 < j0) return;
  double norm = 0.0;
  std::array<double, 64> w{};
  const long n = j1 - j0 + 1;
  require(n <= 64, "pulse support too wide; reduce pulse_sigma");
  for (long j = j0; j <= j1; ++j) {
    const double d = (j - center) / sigma;
    const double wj = std::exp(-0.5 * d * d);
    w[j - j0] = wj;
    norm += wj;
  }
  for (long j = std::max<long>(j0, 0); j <= std::min<long>(j1, n_bins - 1); ++j) {
    const double v = amount * w[j - j0] / norm;
    bins[j] += v;
    *deposited += v;
  }
}

}  // namespace

void OpticalParams::validate() const {
  if (!(signal_scale > 0)) throw ConfigError("signal_scale (A) must be positive");
  if (background_rate < 0) throw ConfigError("background_rate (B) must be >= 0");
  if (n_bins < 2) throw ConfigError("n_bins must be >= 2");
  if (pulse_sigma < 0) throw ConfigError("pulse_sigma must be >= 0");
}

ExpectedHistogram expected_histogram(const Image& hr_depth, const Image& hr_intensity,
                                     const OpticalParams& params, double d_max) {
  params.validate();
  require(d_max > 0, "d_max must be positive");
  require(hr_depth.rows() == hr_intensity.rows() &&
              hr_depth.cols() == hr_intensity.cols(),
          "depth/intensity shape mismatch");
  require(hr_depth.rows() % kBlock == 0 && hr_depth.cols() % kBlock == 0,
          "HR frame extents must be multiples of 4");
  require((hr_depth > 0.0).all(), "depths must be positive");

  ExpectedHistogram ex;
  ex.width = static_cast<int>(hr_depth.cols()) / kBlock;
  ex.height = static_cast<int>(hr_depth.rows()) / kBlock;
  ex.n_bins = params.n_bins;
  ex.bin_width = d_max / params.n_bins;
  ex.lambda = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(ex.width) * ex.height * ex.n_bins);
  ex.signal_total = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(ex.width) * ex.height);
  ex.background_total = Eigen::ArrayXd::Zero(ex.signal_total.size());

  for (int ly = 0; ly < ex.height; ++ly) {
    for (int lx = 0; lx < ex.width; ++lx) {
      double* bins = ex.pixel_lambda(ly, lx);
      const Eigen::Index px = static_cast<Eigen::Index>(ly) * ex.width + lx;
      double deposited = 0.0;
      double rho_sum = 0.0;
      for (int sy = 0; sy < kBlock; ++sy) {
        for (int sx = 0; sx < kBlock; ++sx) {
          const double d = hr_depth(ly * kBlock + sy, lx * kBlock + sx);
          const double rho = hr_intensity(ly * kBlock + sy, lx * kBlock + sx);
          rho_sum += rho;
          const double lam_s = params.signal_scale * rho / (d * d);
          const double center = d / ex.bin_width - 0.5;
          deposit_pulse(bins, ex.n_bins, lam_s, center, params.pulse_sigma,
                        &deposited);
        }
      }
      const double bg_per_bin = params.background_rate * rho_sum;
      for (int b = 0; b < ex.n_bins; ++b) bins[b] += bg_per_bin;
      ex.signal_total[px] = deposited;
      ex.background_total[px] = bg_per_bin * ex.n_bins;
    }
  }
  return ex;
}

void sample_poisson(const ExpectedHistogram& expected, std::uint64_t seed,
                    int frame_idx, std::uint32_t* out, int n_threads) {
  require(all_finite(expected.lambda) && (expected.lambda >= 0.0).all(),
          "lambda must be finite and non-negative");
  const int n_pixels = expected.width * expected.height;
  const int bins = expected.n_bins;
  auto sample_range = [&](int px_begin, int px_end) {
    for (int px = px_begin; px < px_end; ++px) {
      const double* lam = expected.lambda.data() + static_cast<std::size_t>(px) * bins;
      std::uint32_t* dst = out + static_cast<std::size_t>(px) * bins;
      for (int b = 0; b < bins; ++b) {
        RandomStream stream(seed, static_cast<std::uint64_t>(frame_idx),
                            static_cast<std::uint64_t>(px),
                            static_cast<std::uint64_t>(b));
        dst[b] = static_cast<std::uint32_t>(stream.next_poisson(lam[b]));
      }
    }
  };
  if (n_threads <= 1) {
    sample_range(0, n_pixels);
    return;
  }
  std::vector<std::thread> pool;
  const int chunk = (n_pixels + n_threads - 1) / n_threads;
  for (int t = 0; t < n_threads; ++t) {
    const int b = t * chunk, e = std::min(n_pixels, b + chunk);
    if (b < e) pool.emplace_back(sample_range, b, e);
  }
  for (auto& th : pool) th.join();
}

double measure_snr(const ExpectedHistogram& expected) {
  double sum = 0.0;
  Eigen::Index n = 0;
  for (Eigen::Index px = 0; px < expected.signal_total.size(); ++px) {
    const double b = expected.background_total[px];
    if (b > 0.0) {
      sum += expected.signal_total[px] / b;
      ++n;
    }
  }
  if (n == 0) return std::numeric_limits<double>::infinity();
  return sum / static_cast<double>(n);
}

double calibrate_background_rate(const GroundTruthSequence& gt,
                                 const OpticalParams& params, double target_snr) {
  require(target_snr > 0, "target_snr must be positive");
  require(gt.n_frames() > 0, "empty sequence");
  // SNR scales as 1/B, so one measurement at B=1 fixes B exactly.
  OpticalParams probe = params;
  probe.background_rate = 1.0;
  double mean = 0.0;
  for (int t = 0; t < gt.n_frames(); ++t) {
    const auto ex = expected_histogram(gt.depth[t], gt.intensity[t], probe, gt.d_max);
    const double snr = measure_snr(ex);
    if (!std::isfinite(snr))
      throw NumericalError("cannot calibrate SNR: no background photons");
    mean += snr;
  }
  mean /= gt.n_frames();
  if (mean <= 0.0)
    throw NumericalError("cannot calibrate SNR: scene produces no signal");
  return mean / target_snr;
}

DepthEstimate extract_depth_com(const std::uint32_t* bins, int n_bins,
                                double bin_width) {
  require(n_bins >= 2, "need at least two bins");
  require(bin_width > 0, "bin_width must be positive");

  // Background estimate: median count over all bins.
  std::vector<std::uint32_t> sorted(bins, bins + n_bins);
  std::sort(sorted.begin(), sorted.end());
  const double median =
      n_bins % 2 == 1
          ? static_cast<double>(sorted[n_bins / 2])
          : 0.5 * (static_cast<double>(sorted[n_bins / 2 - 1]) + sorted[n_bins / 2]);

  std::vector<double> v(n_bins);
  for (int i = 0; i < n_bins; ++i)
    v[i] = std::max(0.0, static_cast<double>(bins[i]) - median);

  int peak = 0;
  for (int i = 1; i < n_bins; ++i)
    if (v[i] > v[peak]) peak = i;  // strict: ties resolve to the lower index

  double wsum = 0.0, msum = 0.0;
  for (int i = std::max(0, peak - 1); i <= std::min(n_bins - 1, peak + 1); ++i) {
    wsum += v[i];
    msum += v[i] * (i + 0.5) * bin_width;
  }
  if (wsum <= 0.0) return {0.0, false};
  return {msum / wsum, true};
}

Image extract_depth_frame(const HistogramCube& cube, int frame) {
  require(frame >= 0 && frame < cube.n_frames, "frame index out of range");
  Image out(cube.height, cube.width);
  for (int y = 0; y < cube.height; ++y) {
    for (int x = 0; x < cube.width; ++x) {
      const auto est =
          extract_depth_com(cube.pixel(frame, y, x), cube.n_bins, cube.bin_width);
      out(y, x) = est.valid ? est.depth_m : cube.d_max;
    }
  }
  return out;
}

HistogramCube simulate(const GroundTruthSequence& gt, OpticalParams params,
                       double target_snr, int n_threads) {
  params.validate();
  require(gt.n_frames() > 0, "empty sequence");
  if (target_snr > 0)
    params.background_rate = calibrate_background_rate(gt, params, target_snr);

  HistogramCube cube;
  cube.width = static_cast<int>(gt.depth[0].cols()) / kBlock;
  cube.height = static_cast<int>(gt.depth[0].rows()) / kBlock;
  cube.n_frames = gt.n_frames();
  cube.n_bins = params.n_bins;
  cube.d_max = static_cast<float>(gt.d_max);
  cube.bin_width = static_cast<float>(gt.d_max / params.n_bins);
  cube.fps = static_cast<float>(gt.fps);
  cube.target_snr = static_cast<float>(target_snr > 0 ? target_snr : 0.0);
  cube.counts.resize(cube.frame_stride() * cube.n_frames);
  for (int t = 0; t < cube.n_frames; ++t) {
    const auto ex = expected_histogram(gt.depth[t], gt.intensity[t], params, gt.d_max);
    sample_poisson(ex, params.seed, t, cube.counts.data() + cube.frame_stride() * t,
                   n_threads);
  }
  return cube;
}

DepthSequence extract_depth_sequence(const HistogramCube& cube) {
  DepthSequence seq;
  seq.fps = cube.fps;
  seq.d_max = cube.d_max;
  seq.depth.reserve(cube.n_frames);
  for (int t = 0; t < cube.n_frames; ++t)
    seq.depth.push_back(extract_depth_frame(cube, t));
  return seq;
}

}  // namespace spadsr
