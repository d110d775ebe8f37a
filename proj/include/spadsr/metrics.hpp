#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "spadsr/image.hpp"

namespace spadsr {

// Reconstruction-quality measures for normalized ([0,1], peak = 1) depth
// frames. All statistics are global per frame with population (1/N) moments.

/// 20*log10(1/RMSE); +infinity when the frames are identical.
double psnr(const Image& sr, const Image& gt);

/// Structural similarity from whole-frame means, variances, and the
/// SR-GT covariance, with stabilizers c1 = 0.0001 and c2 = 0.0009.
double ssim(const Image& sr, const Image& gt);

/// Flicker count between consecutive frames: pixels where the ground truth
/// is static (|gt_t - gt_next| = 0) but the reconstruction moves by more
/// than `tau`.
int temporal_coherence(const Image& gt_t, const Image& gt_next,
                       const Image& sr_t, const Image& sr_next,
                       double tau = 0.0);

/// Per-pixel absolute difference.
Image error_map(const Image& sr, const Image& gt);

struct MetricsReport {
  std::vector<double> psnr_frames;
  std::vector<double> ssim_frames;
  std::vector<int> tc_frames;  // one entry per consecutive pair
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double mean_tc = 0.0;
  double throughput_fps = 0.0;  // frames per second of wall-clock processing
};

/// Per-frame metrics over an aligned pair of sequences. `elapsed_seconds`
/// (wall clock spent producing `sr`) sets throughput_fps; pass 0 to skip.
MetricsReport evaluate_sequence(const std::vector<Image>& sr,
                                const std::vector<Image>& gt, double tau,
                                double elapsed_seconds = 0.0);

/// Formats a metric value, serializing infinities as "inf".
std::string format_metric(double v);

/// Per-frame CSV rows (sequence, frame, method, psnr, ssim, tc) for one
/// method. `header` controls whether the header + provenance comment are
/// written first.
void write_metrics_csv(std::ostream& os, const std::string& sequence,
                       const std::string& method, const MetricsReport& report,
                       const std::string& config_hash, bool header);

}  // namespace spadsr
