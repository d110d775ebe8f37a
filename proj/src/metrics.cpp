#include "spadsr/metrics.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "spadsr/errors.hpp"

namespace spadsr {

namespace {

void require_same_shape(const Image& a, const Image& b, const char* what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          std::string(what) + ": frame shapes differ");
}

constexpr double kSsimC1 = 0.0001;
constexpr double kSsimC2 = 0.0009;

}  // namespace

double psnr(const Image& sr, const Image& gt) {
  require_same_shape(sr, gt, "psnr");
  const double mse = (sr - gt).square().mean();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(1.0 / std::sqrt(mse));
}

double ssim(const Image& sr, const Image& gt) {
  require_same_shape(sr, gt, "ssim");
  const double mu_sr = sr.mean();
  const double mu_gt = gt.mean();
  const double var_sr = (sr - mu_sr).square().mean();
  const double var_gt = (gt - mu_gt).square().mean();
  const double cov = ((sr - mu_sr) * (gt - mu_gt)).mean();
  return (2.0 * mu_gt * mu_sr + kSsimC1) * (2.0 * cov + kSsimC2) /
         ((mu_gt * mu_gt + mu_sr * mu_sr + kSsimC1) * (var_gt + var_sr + kSsimC2));
}

int temporal_coherence(const Image& gt_t, const Image& gt_next,
                       const Image& sr_t, const Image& sr_next, double tau) {
  require_same_shape(gt_t, gt_next, "temporal_coherence");
  require_same_shape(sr_t, sr_next, "temporal_coherence");
  require_same_shape(gt_t, sr_t, "temporal_coherence");
  require(tau >= 0.0, "temporal_coherence: tau must be non-negative");
  int count = 0;
  for (Eigen::Index i = 0; i < gt_t.size(); ++i) {
    const bool gt_static = gt_t.data()[i] == gt_next.data()[i];
    const bool sr_moves = std::abs(sr_t.data()[i] - sr_next.data()[i]) > tau;
    if (gt_static && sr_moves) ++count;
  }
  return count;
}

Image error_map(const Image& sr, const Image& gt) {
  require_same_shape(sr, gt, "error_map");
  return (sr - gt).abs();
}

MetricsReport evaluate_sequence(const std::vector<Image>& sr,
                                const std::vector<Image>& gt, double tau,
                                double elapsed_seconds) {
  require(sr.size() == gt.size(), "evaluate_sequence: sequence lengths differ");
  require(!sr.empty(), "evaluate_sequence: empty sequences");
  MetricsReport report;
  for (std::size_t t = 0; t < sr.size(); ++t) {
    report.psnr_frames.push_back(psnr(sr[t], gt[t]));
    report.ssim_frames.push_back(ssim(sr[t], gt[t]));
    if (t + 1 < sr.size())
      report.tc_frames.push_back(
          temporal_coherence(gt[t], gt[t + 1], sr[t], sr[t + 1], tau));
  }
  double psnr_sum = 0.0, ssim_sum = 0.0;
  for (double v : report.psnr_frames) psnr_sum += v;
  for (double v : report.ssim_frames) ssim_sum += v;
  report.mean_psnr = psnr_sum / static_cast<double>(report.psnr_frames.size());
  report.mean_ssim = ssim_sum / static_cast<double>(report.ssim_frames.size());
  if (!report.tc_frames.empty()) {
    double tc_sum = 0.0;
    for (int v : report.tc_frames) tc_sum += v;
    report.mean_tc = tc_sum / static_cast<double>(report.tc_frames.size());
  }
  if (elapsed_seconds > 0.0)
    report.throughput_fps = static_cast<double>(sr.size()) / elapsed_seconds;
  return report;
}

std::string format_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(9);
  os << v;
  return os.str();
}

void write_metrics_csv(std::ostream& os, const std::string& sequence,
                       const std::string& method, const MetricsReport& report,
                       const std::string& config_hash, bool header) {
  if (header) {
    os << "# config-hash=" << config_hash << "\n";
    os << "sequence,frame,method,psnr,ssim,tc\n";
  }
  for (std::size_t t = 0; t < report.psnr_frames.size(); ++t) {
    const int tc = t < report.tc_frames.size() ? report.tc_frames[t] : 0;
    os << sequence << "," << t << "," << method << ","
       << format_metric(report.psnr_frames[t]) << ","
       << format_metric(report.ssim_frames[t]) << "," << tc << "\n";
  }
}

}  // namespace spadsr
