#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "spadsr/image.hpp"

namespace spadsr::ad {

// Minimal dense N-d array engine with reverse-mode gradients. Values are
// 64-bit floats in row-major order (last axis fastest). Ops record a tape;
// backward() walks it once in reverse topological order. Gradients live in
// a per-call GradStore, so independent graphs sharing the same parameter
// tensors can run backward concurrently.

using Shape = std::vector<int>;

Eigen::Index numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class GradStore;

struct Node {
  Shape shape;
  Eigen::ArrayXd value;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Node&, GradStore&)> backward_fn;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor constant(Shape shape, double fill, bool requires_grad = false);
  static Tensor from_data(Shape shape, Eigen::ArrayXd data, bool requires_grad = false);
  static Tensor from_image(const Image& img, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Eigen::Index size() const { return node_->value.size(); }
  const Eigen::ArrayXd& value() const { return node_->value; }
  Eigen::ArrayXd& value() { return node_->value; }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  double scalar() const;
  /// Copies a [1,H,W,1] or [H,W] tensor back into an image.
  Image to_image() const;

  std::shared_ptr<Node> node() const { return node_; }
  static Tensor wrap(std::shared_ptr<Node> node);

 private:
  std::shared_ptr<Node> node_;
};

class GradStore {
 public:
  bool has(const Node* n) const { return grads_.count(n) != 0; }
  /// Gradient for `t`; throws if backward never reached it.
  const Eigen::ArrayXd& operator[](const Tensor& t) const;
  Eigen::ArrayXd& accumulate(const Node* n);  // zero-initialized on first use

 private:
  std::unordered_map<const Node*, Eigen::ArrayXd> grads_;
};

/// Reverse-mode sweep from a scalar loss. Exactly one visit per node.
GradStore backward(const Tensor& loss);

enum class Pad { Zero, Replicate };

struct BnStats {
  Eigen::ArrayXd mean;  // per channel
  Eigen::ArrayXd var;   // population (1/N)
};

// --- operations -----------------------------------------------------------

/// 3-D convolution, stride 1, same extents. x: [T,H,W,Ci], w: [kt,kh,kw,Ci,Co],
/// bias: [Co]. Kernel extents must be odd. Temporal and spatial padding modes
/// are independent.
Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& bias,
              Pad pad_temporal, Pad pad_spatial);

/// Normalizes over all non-channel axes (channels = last axis) with the
/// statistics of this tensor; eps stabilizes zero-variance channels.
/// When `stats_out` is given, the batch mean/var are reported there.
Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        double eps, BnStats* stats_out = nullptr);

/// Normalizes with fixed (running) statistics.
Tensor batch_norm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       const Eigen::ArrayXd& mean, const Eigen::ArrayXd& var,
                       double eps);

Tensor relu(const Tensor& x);

/// Softmax over trailing groups of `group` elements (max-subtracted).
Tensor softmax_last(const Tensor& x, int group);

/// [T,H,W,C*r^2] -> [T,rH,rW,C]; block channel c maps to offset
/// (c mod r, floor(c/r)).
Tensor depth_to_space(const Tensor& x, int r);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor sum_all(const Tensor& x);

/// [T,H,W,C] -> [1,H,W,C], the slice at time t.
Tensor slice_time(const Tensor& x, int t);

/// Concatenate along the channel (last) axis.
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Clamp to [0,1]; gradient passes through where 0 <= x <= 1.
Tensor clamp01(const Tensor& x);

/// Per-LR-pixel dynamic filters. weights: [1,H,W,r^2*kf^2] (already softmaxed
/// per tap group), frame: [1,H,W,1]. Output [1,H,W,r^2]; subpixel s of pixel
/// (y,x) is the tap-weighted sum of the frame's kf x kf neighborhood
/// (replicate border).
Tensor dynamic_filter_apply(const Tensor& weights, const Tensor& frame, int r, int kf);

/// Mean elementwise Huber loss against a constant target. Scalar output.
Tensor huber_loss(const Tensor& pred, const Eigen::ArrayXd& target, double delta);

}  // namespace spadsr::ad
