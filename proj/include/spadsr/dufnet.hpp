#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spadsr/image.hpp"
#include "spadsr/tensor.hpp"

namespace spadsr {

// Dynamic-upsampling-filter video super-resolution network. A stack of
// 3+temporal_radius dense 3-D convolution blocks feeds two per-pixel heads:
// one predicts softmax-normalized upsampling filter taps applied to the
// central low-resolution frame, the other a high-resolution residual that is
// added afterwards.

struct NetConfig {
  int temporal_radius = 2;  // frames on each side of the center (0..4)
  int upscale = 4;          // r: 4 or 8
  int base_channels = 16;   // feature width added per block
  int filter_size = 5;      // k_f, odd
  double bn_eps = 1e-5;
  bool clamp_output = true;  // disable only for finite-difference gradient tests

  int n_blocks() const { return 3 + temporal_radius; }
  int window_length() const { return 2 * temporal_radius + 1; }
  int hidden_channels() const { return 2 * base_channels; }
  int feature_channels() const { return 1 + n_blocks() * base_channels; }

  void validate() const;  // throws ConfigError
};

struct BlockParams {
  ad::Tensor bn1_gamma, bn1_beta;  // over block input channels
  ad::Tensor conv1_w, conv1_b;     // 1x1x1: C_in -> base
  ad::Tensor bn2_gamma, bn2_beta;  // over base channels
  ad::Tensor conv2_w, conv2_b;     // 3x3x3: base -> base
  Eigen::ArrayXd bn1_mean, bn1_var, bn2_mean, bn2_var;  // running statistics
};

struct HeadParams {
  ad::Tensor conv1_w, conv1_b;  // 1x1x1: features -> hidden
  ad::Tensor conv2_w, conv2_b;  // 1x1x1: hidden -> output channels
};

class DufNet {
 public:
  explicit DufNet(const NetConfig& cfg);

  const NetConfig& config() const { return cfg_; }

  /// Random parameter initialization (deterministic in seed): He-normal conv
  /// weights, zero biases, unit-gamma/zero-beta norms; the two head output
  /// convs start at zero so training begins from a plain smoothed upsample.
  void init(std::uint64_t seed);

  /// window: [2*T_R+1, H, W, 1] normalized depth. Training mode normalizes
  /// with batch statistics and, if `stats_out` is given, appends one BnStats
  /// per norm layer (fixed order). Eval mode uses the running statistics.
  ad::Tensor forward(const ad::Tensor& window, bool training,
                     std::vector<ad::BnStats>* stats_out = nullptr) const;

  /// Eval-mode forward on a normalized LR window; returns the HR frame.
  Image infer(const std::vector<Image>& window) const;

  /// Trainable tensors in a fixed, stable order (paired with names()).
  std::vector<ad::Tensor> parameters() const;
  std::vector<std::string> parameter_names() const;
  std::size_t count_params() const;
  static std::size_t count_params(const NetConfig& cfg);

  int n_norm_layers() const { return 2 * cfg_.n_blocks(); }
  /// Exponential-moving-average update of the running statistics from one
  /// batch's averaged per-layer statistics.
  void update_running_stats(const std::vector<ad::BnStats>& batch_stats,
                            double momentum);

  /// Deep copies of every parameter value and running statistic.
  std::vector<Eigen::ArrayXd> snapshot() const;
  void restore(const std::vector<Eigen::ArrayXd>& snap);

  void save(const std::string& path) const;
  static DufNet load(const std::string& path);

  std::vector<BlockParams>& blocks() { return blocks_; }
  HeadParams& filter_head() { return filter_head_; }
  HeadParams& residual_head() { return residual_head_; }

 private:
  NetConfig cfg_;
  std::vector<BlockParams> blocks_;
  HeadParams filter_head_;   // emits r^2 * k_f^2 tap logits
  HeadParams residual_head_; // emits r^2 residual channels
};

/// Stacks HxW frames into a [T,H,W,1] tensor.
ad::Tensor window_to_tensor(const std::vector<Image>& frames,
                            bool requires_grad = false);

}  // namespace spadsr
