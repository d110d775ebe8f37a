#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "spadsr/containers.hpp"
#include "spadsr/image.hpp"
#include "spadsr/scene.hpp"

namespace spadsr {

// SPAD forward model: high-resolution depth+intensity frames become
// low-resolution 16-bin photon-count histograms. Each LR pixel sums the
// photon returns of its 4x4 HR subpixel block; signal follows A*rho/d^2
// spread over bins by a truncated Gaussian pulse, background adds B*rho
// per bin per subpixel. Counts are Poisson draws from counter-based
// streams keyed by (seed, frame, pixel, bin).

struct OpticalParams {
  double signal_scale = 400.0;     // A, photons * m^2 per subpixel
  double background_rate = 1.0;    // B, photons/bin per unit reflectance per subpixel
  int n_bins = 16;
  double pulse_sigma = 0.5;        // pulse spread in bins; 0 collapses to a delta
  std::uint64_t seed = 0;

  void validate() const;
};

struct ExpectedHistogram {
  int width = 0;
  int height = 0;
  int n_bins = 16;
  double bin_width = 0.0;
  Eigen::ArrayXd lambda;            // H*W*bins, bin-innermost
  Eigen::ArrayXd signal_total;      // H*W, photons deposited in the histogram
  Eigen::ArrayXd background_total;  // H*W

  double* pixel_lambda(int y, int x) {
    return lambda.data() + (static_cast<std::size_t>(y) * width + x) * n_bins;
  }
  const double* pixel_lambda(int y, int x) const {
    return lambda.data() + (static_cast<std::size_t>(y) * width + x) * n_bins;
  }
};

ExpectedHistogram expected_histogram(const Image& hr_depth, const Image& hr_intensity,
                                     const OpticalParams& params, double d_max);

/// Poisson-sample one frame of counts into `out` (width*height*bins values).
/// Bit-identical for a given (seed, frame) regardless of evaluation order.
void sample_poisson(const ExpectedHistogram& expected, std::uint64_t seed,
                    int frame_idx, std::uint32_t* out, int n_threads = 1);

/// Frame-average SNR: mean over pixels of signal/background photon totals.
/// Pixels with zero background are excluded; +infinity if every pixel is.
double measure_snr(const ExpectedHistogram& expected);

/// Scale factor for B so the sequence-average SNR hits target_snr exactly
/// (SNR is proportional to 1/B for a fixed A). Returns the adjusted B.
double calibrate_background_rate(const GroundTruthSequence& gt,
                                 const OpticalParams& params, double target_snr);

struct DepthEstimate {
  double depth_m = 0.0;
  bool valid = false;
};

/// Centre-of-mass peak extraction on a single histogram: median background
/// subtraction, argmax (ties to the lower bin), CoM over argmax +/- 1 using
/// bin centers (i + 0.5) * bin_width.
DepthEstimate extract_depth_com(const std::uint32_t* bins, int n_bins,
                                double bin_width);

/// Per-frame depth extraction; invalid pixels are substituted with d_max.
Image extract_depth_frame(const HistogramCube& cube, int frame);

/// Full forward pass: calibrate B to target_snr (unless target_snr <= 0, in
/// which case params.background_rate is used as-is), then simulate all frames.
HistogramCube simulate(const GroundTruthSequence& gt, OpticalParams params,
                       double target_snr, int n_threads = 1);

/// Extract every frame of a cube into an LR depth sequence (meters).
DepthSequence extract_depth_sequence(const HistogramCube& cube);

}  // namespace spadsr
