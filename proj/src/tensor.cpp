#include "spadsr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_set>

#include "spadsr/errors.hpp"

namespace spadsr::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

std::shared_ptr<Node> make_node(Shape shape, Eigen::ArrayXd value) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  return n;
}

bool any_requires(std::initializer_list<const Tensor*> ts) {
  for (const auto* t : ts)
    if (t->requires_grad()) return true;
  return false;
}

int last_dim(const Shape& s) {
  require(!s.empty(), "tensor must have at least one axis");
  return s.back();
}

}  // namespace

Eigen::Index numel(const Shape& shape) {
  Eigen::Index n = 1;
  for (int d : shape) {
    require(d > 0, "shape extents must be positive");
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return from_data(shape, Eigen::ArrayXd::Zero(numel(shape)), requires_grad);
}

Tensor Tensor::constant(Shape shape, double fill, bool requires_grad) {
  return from_data(shape, Eigen::ArrayXd::Constant(numel(shape), fill), requires_grad);
}

Tensor Tensor::from_data(Shape shape, Eigen::ArrayXd data, bool requires_grad) {
  require(numel(shape) == data.size(), "data length does not match shape");
  Tensor t;
  t.node_ = make_node(std::move(shape), std::move(data));
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from_image(const Image& img, bool requires_grad) {
  Eigen::ArrayXd data = Eigen::Map<const Eigen::ArrayXd>(img.data(), img.size());
  return from_data({1, static_cast<int>(img.rows()), static_cast<int>(img.cols()), 1},
                   std::move(data), requires_grad);
}

Tensor Tensor::wrap(std::shared_ptr<Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

double Tensor::scalar() const {
  require(defined() && size() == 1, "not a scalar tensor");
  return node_->value[0];
}

Image Tensor::to_image() const {
  require(defined(), "undefined tensor");
  const auto& s = node_->shape;
  int h = 0, w = 0;
  if (s.size() == 2) {
    h = s[0];
    w = s[1];
  } else if (s.size() == 4 && s[0] == 1 && s[3] == 1) {
    h = s[1];
    w = s[2];
  } else {
    require(false, "tensor shape " + shape_str(s) + " is not an image");
  }
  Image img(h, w);
  std::memcpy(img.data(), node_->value.data(), sizeof(double) * node_->value.size());
  return img;
}

const Eigen::ArrayXd& GradStore::operator[](const Tensor& t) const {
  const auto it = grads_.find(t.node().get());
  require(it != grads_.end(), "no gradient recorded for tensor");
  return it->second;
}

Eigen::ArrayXd& GradStore::accumulate(const Node* n) {
  auto it = grads_.find(n);
  if (it == grads_.end())
    it = grads_.emplace(n, Eigen::ArrayXd::Zero(n->value.size())).first;
  return it->second;
}

GradStore backward(const Tensor& loss) {
  require(loss.defined(), "backward on an undefined tensor; run a forward pass first");
  require(loss.size() == 1, "loss must be a scalar");

  // Reverse of DFS post-order is a valid reverse-topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* n;
    std::size_t next;
  };
  std::vector<Frame> stack{{loss.node().get(), 0}};
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.next < top.n->parents.size()) {
      Node* p = top.n->parents[top.next++].get();
      if (visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(top.n);
      stack.pop_back();
    }
  }

  GradStore store;
  store.accumulate(loss.node().get())[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && store.has(n)) n->backward_fn(*n, store);
  }
  return store;
}

// --- convolution ----------------------------------------------------------

namespace {

struct ConvDims {
  int T, H, W, Ci, kt, kh, kw, Co;
  int K() const { return kt * kh * kw * Ci; }
};

// Gathers the receptive fields of output slice t into `col` (H*W rows x K
// cols, row-major). Out-of-range taps are zero-filled (Pad::Zero) or clamped
// (Pad::Replicate).
void build_col(const double* x, const ConvDims& d, int t, Pad pt, Pad ps,
               double* col) {
  const int K = d.K();
  const int ct = d.kt / 2, ch = d.kh / 2, cw = d.kw / 2;
  for (int y = 0; y < d.H; ++y) {
    for (int xx = 0; xx < d.W; ++xx) {
      double* row = col + (static_cast<std::size_t>(y) * d.W + xx) * K;
      int k = 0;
      for (int dt = 0; dt < d.kt; ++dt) {
        int tt = t + dt - ct;
        bool t_ok = true;
        if (tt < 0 || tt >= d.T) {
          if (pt == Pad::Replicate)
            tt = std::clamp(tt, 0, d.T - 1);
          else
            t_ok = false;
        }
        for (int dy = 0; dy < d.kh; ++dy) {
          int yy = y + dy - ch;
          bool y_ok = t_ok;
          if (y_ok && (yy < 0 || yy >= d.H)) {
            if (ps == Pad::Replicate)
              yy = std::clamp(yy, 0, d.H - 1);
            else
              y_ok = false;
          }
          for (int dx = 0; dx < d.kw; ++dx) {
            int xw = xx + dx - cw;
            bool ok = y_ok;
            if (ok && (xw < 0 || xw >= d.W)) {
              if (ps == Pad::Replicate)
                xw = std::clamp(xw, 0, d.W - 1);
              else
                ok = false;
            }
            if (ok) {
              const double* src =
                  x + ((static_cast<std::size_t>(tt) * d.H + yy) * d.W + xw) * d.Ci;
              std::memcpy(row + k, src, sizeof(double) * d.Ci);
            } else {
              std::memset(row + k, 0, sizeof(double) * d.Ci);
            }
            k += d.Ci;
          }
        }
      }
    }
  }
}

// Scatter-add of a column-gradient matrix back onto the input gradient,
// mirroring build_col's index walk.
void scatter_col(const double* dcol, const ConvDims& d, int t, Pad pt, Pad ps,
                 double* grad_x) {
  const int K = d.K();
  const int ct = d.kt / 2, ch = d.kh / 2, cw = d.kw / 2;
  for (int y = 0; y < d.H; ++y) {
    for (int xx = 0; xx < d.W; ++xx) {
      const double* row = dcol + (static_cast<std::size_t>(y) * d.W + xx) * K;
      int k = 0;
      for (int dt = 0; dt < d.kt; ++dt) {
        int tt = t + dt - ct;
        bool t_ok = true;
        if (tt < 0 || tt >= d.T) {
          if (pt == Pad::Replicate)
            tt = std::clamp(tt, 0, d.T - 1);
          else
            t_ok = false;
        }
        for (int dy = 0; dy < d.kh; ++dy) {
          int yy = y + dy - ch;
          bool y_ok = t_ok;
          if (y_ok && (yy < 0 || yy >= d.H)) {
            if (ps == Pad::Replicate)
              yy = std::clamp(yy, 0, d.H - 1);
            else
              y_ok = false;
          }
          for (int dx = 0; dx < d.kw; ++dx) {
            int xw = xx + dx - cw;
            bool ok = y_ok;
            if (ok && (xw < 0 || xw >= d.W)) {
              if (ps == Pad::Replicate)
                xw = std::clamp(xw, 0, d.W - 1);
              else
                ok = false;
            }
            if (ok) {
              double* dst =
                  grad_x +
                  ((static_cast<std::size_t>(tt) * d.H + yy) * d.W + xw) * d.Ci;
              for (int ci = 0; ci < d.Ci; ++ci) dst[ci] += row[k + ci];
            }
            k += d.Ci;
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& bias,
              Pad pad_temporal, Pad pad_spatial) {
  require(x.shape().size() == 4, "conv3d input must be [T,H,W,C], got " +
                                     shape_str(x.shape()));
  require(w.shape().size() == 5, "conv3d weights must be [kt,kh,kw,Ci,Co]");
  require(bias.shape().size() == 1, "conv3d bias must be [Co]");
  ConvDims d{x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3],
             w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[4]};
  require(w.shape()[3] == d.Ci, "channel mismatch: input has " +
                                    std::to_string(d.Ci) + ", weights expect " +
                                    std::to_string(w.shape()[3]));
  require(bias.shape()[0] == d.Co, "bias length must equal output channels");
  require(d.kt % 2 == 1 && d.kh % 2 == 1 && d.kw % 2 == 1,
          "kernel extents must be odd");

  const int HW = d.H * d.W;
  const int K = d.K();
  const bool pointwise = (d.kt == 1 && d.kh == 1 && d.kw == 1);

  Eigen::ArrayXd out(static_cast<Eigen::Index>(d.T) * HW * d.Co);
  MapConstMat Wm(w.value().data(), K, d.Co);
  const Eigen::RowVectorXd bias_row =
      Eigen::Map<const Eigen::VectorXd>(bias.value().data(), d.Co).transpose();

  if (pointwise) {
    MapConstMat X(x.value().data(), static_cast<Eigen::Index>(d.T) * HW, d.Ci);
    MapMat Y(out.data(), static_cast<Eigen::Index>(d.T) * HW, d.Co);
    Y.noalias() = X * Wm;
    Y.rowwise() += bias_row;
  } else {
    RowMat col(HW, K);
    for (int t = 0; t < d.T; ++t) {
      build_col(x.value().data(), d, t, pad_temporal, pad_spatial, col.data());
      MapMat Y(out.data() + static_cast<std::size_t>(t) * HW * d.Co, HW, d.Co);
      Y.noalias() = col * Wm;
      Y.rowwise() += bias_row;
    }
  }

  auto node = make_node({d.T, d.H, d.W, d.Co}, std::move(out));
  if (any_requires({&x, &w, &bias})) {
    node->requires_grad = true;
    node->parents = {x.node(), w.node(), bias.node()};
    auto xn = x.node(), wn = w.node(), bn = bias.node();
    node->backward_fn = [d, pad_temporal, pad_spatial, xn, wn, bn, HW, K,
                         pointwise](const Node& self, GradStore& store) {
      const Eigen::ArrayXd& g = store.accumulate(&self);
      MapConstMat Wm2(wn->value.data(), K, d.Co);
      if (pointwise) {
        MapConstMat G(g.data(), static_cast<Eigen::Index>(d.T) * HW, d.Co);
        if (wn->requires_grad) {
          MapConstMat X(xn->value.data(), static_cast<Eigen::Index>(d.T) * HW, d.Ci);
          MapMat dW(store.accumulate(wn.get()).data(), K, d.Co);
          dW.noalias() += X.transpose() * G;
        }
        if (bn->requires_grad) {
          Eigen::Map<Eigen::VectorXd> db(store.accumulate(bn.get()).data(), d.Co);
          db.noalias() += G.colwise().sum().transpose();
        }
        if (xn->requires_grad) {
          MapMat dX(store.accumulate(xn.get()).data(),
                    static_cast<Eigen::Index>(d.T) * HW, d.Ci);
          dX.noalias() += G * Wm2.transpose();
        }
        return;
      }
      RowMat col(HW, K), dcol(HW, K);
      for (int t = 0; t < d.T; ++t) {
        MapConstMat Gt(g.data() + static_cast<std::size_t>(t) * HW * d.Co, HW, d.Co);
        if (wn->requires_grad) {
          build_col(xn->value.data(), d, t, pad_temporal, pad_spatial, col.data());
          MapMat dW(store.accumulate(wn.get()).data(), K, d.Co);
          dW.noalias() += col.transpose() * Gt;
        }
        if (bn->requires_grad) {
          Eigen::Map<Eigen::VectorXd> db(store.accumulate(bn.get()).data(), d.Co);
          db.noalias() += Gt.colwise().sum().transpose();
        }
        if (xn->requires_grad) {
          dcol.noalias() = Gt * Wm2.transpose();
          scatter_col(dcol.data(), d, t, pad_temporal, pad_spatial,
                      store.accumulate(xn.get()).data());
        }
      }
    };
  }
  return Tensor::wrap(node);
}

// --- batch normalization --------------------------------------------------

Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        double eps, BnStats* stats_out) {
  const int C = last_dim(x.shape());
  require(gamma.shape() == Shape{C} && beta.shape() == Shape{C},
          "gamma/beta must have one value per channel");
  const Eigen::Index rows = x.size() / C;
  require(rows > 0, "empty input");

  MapConstMat X(x.value().data(), rows, C);
  const Eigen::RowVectorXd mean = X.colwise().mean();
  RowMat centered = X.rowwise() - mean;
  const Eigen::RowVectorXd var =
      centered.cwiseProduct(centered).colwise().sum() / static_cast<double>(rows);
  const Eigen::RowVectorXd inv_std = (var.array() + eps).sqrt().inverse();

  RowMat xhat = centered.array().rowwise() * inv_std.array();
  const Eigen::RowVectorXd g_row =
      Eigen::Map<const Eigen::VectorXd>(gamma.value().data(), C).transpose();
  const Eigen::RowVectorXd b_row =
      Eigen::Map<const Eigen::VectorXd>(beta.value().data(), C).transpose();
  RowMat y = (xhat.array().rowwise() * g_row.array()).rowwise() + b_row.array();

  if (stats_out) {
    stats_out->mean = mean.transpose().array();
    stats_out->var = var.transpose().array();
  }

  auto node =
      make_node(x.shape(), Eigen::Map<Eigen::ArrayXd>(y.data(), y.size()));
  if (any_requires({&x, &gamma, &beta})) {
    node->requires_grad = true;
    node->parents = {x.node(), gamma.node(), beta.node()};
    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    // xhat and inv_std are saved; both are needed for every input gradient.
    auto xhat_saved = std::make_shared<RowMat>(std::move(xhat));
    Eigen::RowVectorXd inv_std_saved = inv_std;
    node->backward_fn = [rows, C, xn, gn, bn, xhat_saved, inv_std_saved](
                            const Node& self, GradStore& store) {
      MapConstMat G(store.accumulate(&self).data(), rows, C);
      const RowMat& xh = *xhat_saved;
      if (gn->requires_grad) {
        Eigen::Map<Eigen::VectorXd> dg(store.accumulate(gn.get()).data(), C);
        dg.noalias() += G.cwiseProduct(xh).colwise().sum().transpose();
      }
      if (bn->requires_grad) {
        Eigen::Map<Eigen::VectorXd> db(store.accumulate(bn.get()).data(), C);
        db.noalias() += G.colwise().sum().transpose();
      }
      if (xn->requires_grad) {
        const Eigen::RowVectorXd gamma_row =
            Eigen::Map<const Eigen::VectorXd>(gn->value.data(), C).transpose();
        const Eigen::RowVectorXd mean_g = G.colwise().mean();
        const Eigen::RowVectorXd mean_gx = G.cwiseProduct(xh).colwise().mean();
        MapMat dX(store.accumulate(xn.get()).data(), rows, C);
        RowMat tmp = G.rowwise() - mean_g;
        tmp.array() -= xh.array().rowwise() * mean_gx.array();
        tmp.array().rowwise() *= (gamma_row.array() * inv_std_saved.array());
        dX.noalias() += tmp;
      }
    };
  }
  return Tensor::wrap(node);
}

Tensor batch_norm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       const Eigen::ArrayXd& mean, const Eigen::ArrayXd& var,
                       double eps) {
  const int C = last_dim(x.shape());
  require(gamma.shape() == Shape{C} && beta.shape() == Shape{C},
          "gamma/beta must have one value per channel");
  require(mean.size() == C && var.size() == C, "running stats length mismatch");
  const Eigen::Index rows = x.size() / C;

  const Eigen::RowVectorXd inv_std = (var + eps).sqrt().inverse().matrix().transpose();
  const Eigen::RowVectorXd mean_row = mean.matrix().transpose();
  MapConstMat X(x.value().data(), rows, C);
  RowMat xhat = (X.rowwise() - mean_row).array().rowwise() * inv_std.array();
  const Eigen::RowVectorXd g_row =
      Eigen::Map<const Eigen::VectorXd>(gamma.value().data(), C).transpose();
  const Eigen::RowVectorXd b_row =
      Eigen::Map<const Eigen::VectorXd>(beta.value().data(), C).transpose();
  RowMat y = (xhat.array().rowwise() * g_row.array()).rowwise() + b_row.array();

  auto node = make_node(x.shape(), Eigen::Map<Eigen::ArrayXd>(y.data(), y.size()));
  if (any_requires({&x, &gamma, &beta})) {
    node->requires_grad = true;
    node->parents = {x.node(), gamma.node(), beta.node()};
    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    auto xhat_saved = std::make_shared<RowMat>(std::move(xhat));
    Eigen::RowVectorXd inv_std_saved = inv_std;
    node->backward_fn = [rows, C, xn, gn, bn, xhat_saved, inv_std_saved](
                            const Node& self, GradStore& store) {
      MapConstMat G(store.accumulate(&self).data(), rows, C);
      if (gn->requires_grad) {
        Eigen::Map<Eigen::VectorXd> dg(store.accumulate(gn.get()).data(), C);
        dg.noalias() += G.cwiseProduct(*xhat_saved).colwise().sum().transpose();
      }
      if (bn->requires_grad) {
        Eigen::Map<Eigen::VectorXd> db(store.accumulate(bn.get()).data(), C);
        db.noalias() += G.colwise().sum().transpose();
      }
      if (xn->requires_grad) {
        const Eigen::RowVectorXd gamma_row =
            Eigen::Map<const Eigen::VectorXd>(gn->value.data(), C).transpose();
        MapMat dX(store.accumulate(xn.get()).data(), rows, C);
        dX.array() += G.array().rowwise() * (gamma_row.array() * inv_std_saved.array());
      }
    };
  }
  return Tensor::wrap(node);
}

// --- elementwise and structural ops ---------------------------------------

Tensor relu(const Tensor& x) {
  auto node = make_node(x.shape(), x.value().max(0.0));
  if (x.requires_grad()) {
    node->requires_grad = true;
    node->parents = {x.node()};
    auto xn = x.node();
    node->backward_fn = [xn](const Node& self, GradStore& store) {
      const auto& g = store.accumulate(&self);
      // subgradient 0 at x == 0
      store.accumulate(xn.get()) += g * (xn->value > 0.0).cast<double>();
    };
  }
  return Tensor::wrap(node);
}

Tensor softmax_last(const Tensor& x, int group) {
  require(group >= 1 && x.size() % group == 0,
          "group must divide the number of elements");
  const Eigen::Index rows = x.size() / group;
  MapConstMat X(x.value().data(), rows, group);
  RowMat y(rows, group);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double m = X.row(r).maxCoeff();
    y.row(r) = (X.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  auto node = make_node(x.shape(), Eigen::Map<Eigen::ArrayXd>(y.data(), y.size()));
  if (x.requires_grad()) {
    node->requires_grad = true;
    node->parents = {x.node()};
    auto xn = x.node();
    node->backward_fn = [xn, rows, group](const Node& self, GradStore& store) {
      MapConstMat G(store.accumulate(&self).data(), rows, group);
      MapConstMat Y(self.value.data(), rows, group);
      MapMat dX(store.accumulate(xn.get()).data(), rows, group);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const double dot = G.row(r).dot(Y.row(r));
        dX.row(r).array() += Y.row(r).array() * (G.row(r).array() - dot);
      }
    };
  }
  return Tensor::wrap(node);
}

namespace {

// out(t, y*r+oy, x*r+ox, c) = in(t, y, x, c*r*r + oy*r + ox)
void d2s_map(const Shape& in_shape, int r, Shape* out_shape,
             std::vector<Eigen::Index>* src_of_dst) {
  const int T = in_shape[0], H = in_shape[1], W = in_shape[2], Cin = in_shape[3];
  require(Cin % (r * r) == 0, "r^2 must divide the channel count");
  const int C = Cin / (r * r);
  *out_shape = {T, H * r, W * r, C};
  src_of_dst->resize(numel(*out_shape));
  Eigen::Index dst = 0;
  for (int t = 0; t < T; ++t)
    for (int hy = 0; hy < H * r; ++hy)
      for (int hx = 0; hx < W * r; ++hx)
        for (int c = 0; c < C; ++c, ++dst) {
          const int y = hy / r, oy = hy % r;
          const int x = hx / r, ox = hx % r;
          const int cin = c * r * r + oy * r + ox;
          (*src_of_dst)[dst] =
              ((static_cast<Eigen::Index>(t) * H + y) * W + x) * Cin + cin;
        }
}

}  // namespace

Tensor depth_to_space(const Tensor& x, int r) {
  require(x.shape().size() == 4, "depth_to_space input must be [T,H,W,C]");
  require(r >= 1, "upscale factor must be >= 1");
  Shape out_shape;
  std::vector<Eigen::Index> src_of_dst;
  d2s_map(x.shape(), r, &out_shape, &src_of_dst);
  Eigen::ArrayXd out(numel(out_shape));
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = x.value()[src_of_dst[i]];

  auto node = make_node(std::move(out_shape), std::move(out));
  if (x.requires_grad()) {
    node->requires_grad = true;
    node->parents = {x.node()};
    auto xn = x.node();
    auto map = std::make_shared<std::vector<Eigen::Index>>(std::move(src_of_dst));
    node->backward_fn = [xn, map](const Node& self, GradStore& store) {
      const auto& g = store.accumulate(&self);
      auto& dx = store.accumulate(xn.get());
      for (Eigen::Index i = 0; i < g.size(); ++i) dx[(*map)[i]] += g[i];
    };
  }
  return Tensor::wrap(node);
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
  auto node = make_node(a.shape(), a.value() + b.value());
  if (any_requires({&a, &b})) {
    node->requires_grad = true;
    node->parents = {a.node(), b.node()};
    auto an = a.node(), bn = b.node();
    node->backward_fn = [an, bn](const Node& self, GradStore& store) {
      const auto& g = store.accumulate(&self);
      if (an->requires_grad) store.accumulate(an.get()) += g;
      if (bn->requires_grad) store.accumulate(bn.get()) += g;
    };
  }
  return Tensor::wrap(node);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch");
  auto node = make_node(a.shape(), a.value() * b.value());
  if (any_requires({&a, &b})) {
    node->requires_grad = true;
    node->parents = {a.node(), b.node()};
    auto an = a.node(), bn = b.node();
    node->backward_fn = [an, bn](const Node& self, GradStore& store) {
      const auto& g = store.accumulate(&self);
      if (an->requires_grad) store.accumulate(an.get()) += g * bn->value;
      if (bn->requires_grad) store.accumulate(bn.get()) += g * an->value;
    };
  }
  return Tensor::wrap(node);
}

Tensor sum_all(const Tensor& x) {
  Eigen::ArrayXd out(1);
  out[0] = x.value().sum();
  auto node = make_node({1}, std::move(out));
  if (x.requires_grad()) {
    node->requires_grad = true;
    node->parents = {x.node()};
    auto xn = x.node();
    node->backward_fn = [xn](const Node& self, GradStore& store) {
      const double g = store.accumulate(&self)[0];
      store.accumulate(xn.get()) += g;
    };
  }
  return Tensor::wrap(node);
}

Tensor slice_time(const Tensor& x, int t) {
  require(x.shape().size() == 4, "slice_time input must be [T,H,W,C]");
  const int T = x.shape()[0];
  require(t >= 0 && t < T, "time index out of range");
  const Eigen::Index slice = x.size() / T;
  Eigen::ArrayXd out = x.value().segment(slice * t, slice);
  auto node = make_node({1, x.shape()[1], x.shape()[2], x.shape()[3]}, std::move(out));
  if (x.requires_grad()) {
    node->requires_grad = true;
    node->parents = {x.node()};
    auto xn = x.node();
    node->backward_fn = [xn, t, slice](const Node& self, GradStore& store) {
      const auto& g = store.accumulate(&self);
      store.accumulate(xn.get()).segment(slice * t, slice) += g;
    };
  }
  return Tensor::wrap(node);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require(a.shape().size() == 4 && b.shape().size() == 4,
          "concat_channels expects [T,H,W,C] tensors");
  for (int i = 0; i < 3; ++i)
    require(a.shape()[i] == b.shape()[i], "concat_channels: extents differ");
  const int Ca = a.shape()[3], Cb = b.shape()[3];
  const Eigen::Index voxels = a.size() / Ca;
  Shape out_shape{a.shape()[0], a.shape()[1], a.shape()[2], Ca + Cb};
  Eigen::ArrayXd out(numel(out_shape));
  for (Eigen::Index v = 0; v < voxels; ++v) {
    std::memcpy(out.data() + v * (Ca + Cb), a.value().data() + v * Ca,
                sizeof(double) * Ca);
    std::memcpy(out.data() + v * (Ca + Cb) + Ca, b.value().data() + v * Cb,
                sizeof(double) * Cb);
  }
  auto node = make_node(std::move(out_shape), std::move(out));
  if (any_requires({&a, &b})) {
    node->requires_grad = true;
    node->parents = {a.node(), b.node()};
    auto an = a.node(), bn = b.node();
    node->backward_fn = [an, bn, voxels, Ca, Cb](const Node& self, GradStore& store) {
      const auto& g = store.accumulate(&self);
      if (an->requires_grad) {
        auto& da = store.accumulate(an.get());
        for (Eigen::Index v = 0; v < voxels; ++v)
          da.segment(v * Ca, Ca) += g.segment(v * (Ca + Cb), Ca);
      }
      if (bn->requires_grad) {
        auto& db = store.accumulate(bn.get());
        for (Eigen::Index v = 0; v < voxels; ++v)
          db.segment(v * Cb, Cb) += g.segment(v * (Ca + Cb) + Ca, Cb);
      }
    };
  }
  return Tensor::wrap(node);
}

Tensor clamp01(const Tensor& x) {
  auto node = make_node(x.shape(), x.value().max(0.0).min(1.0));
  if (x.requires_grad()) {
    node->requires_grad = true;
    node->parents = {x.node()};
    auto xn = x.node();
    node->backward_fn = [xn](const Node& self, GradStore& store) {
      const auto& g = store.accumulate(&self);
      store.accumulate(xn.get()) +=
          g * (xn->value >= 0.0 && xn->value <= 1.0).cast<double>();
    };
  }
  return Tensor::wrap(node);
}

Tensor dynamic_filter_apply(const Tensor& weights, const Tensor& frame, int r, int kf) {
  require(weights.shape().size() == 4 && frame.shape().size() == 4,
          "dynamic_filter_apply expects 4-d tensors");
  const int H = frame.shape()[1], W = frame.shape()[2];
  require(frame.shape()[0] == 1 && frame.shape()[3] == 1,
          "frame must be [1,H,W,1]");
  require(kf % 2 == 1, "filter size must be odd");
  const int taps = kf * kf, subpix = r * r;
  require(weights.shape() == Shape({1, H, W, subpix * taps}),
          "weights must be [1,H,W,r^2*kf^2]");

  const int c = kf / 2;
  const double* fr = frame.value().data();
  const double* wt = weights.value().data();
  Eigen::ArrayXd out(static_cast<Eigen::Index>(H) * W * subpix);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double* wp = wt + (static_cast<std::size_t>(y) * W + x) * subpix * taps;
      double* op = out.data() + (static_cast<std::size_t>(y) * W + x) * subpix;
      for (int s = 0; s < subpix; ++s) {
        double acc = 0.0;
        const double* ws = wp + s * taps;
        for (int ty = 0; ty < kf; ++ty) {
          const int yy = std::clamp(y + ty - c, 0, H - 1);
          for (int tx = 0; tx < kf; ++tx) {
            const int xx = std::clamp(x + tx - c, 0, W - 1);
            acc += ws[ty * kf + tx] * fr[static_cast<std::size_t>(yy) * W + xx];
          }
        }
        op[s] = acc;
      }
    }
  }

  auto node = make_node({1, H, W, subpix}, std::move(out));
  if (any_requires({&weights, &frame})) {
    node->requires_grad = true;
    node->parents = {weights.node(), frame.node()};
    auto wn = weights.node(), fn = frame.node();
    node->backward_fn = [wn, fn, H, W, subpix, taps, kf, c](const Node& self,
                                                            GradStore& store) {
      const auto& g = store.accumulate(&self);
      const double* fr2 = fn->value.data();
      const double* wt2 = wn->value.data();
      double* dw = wn->requires_grad ? store.accumulate(wn.get()).data() : nullptr;
      double* df = fn->requires_grad ? store.accumulate(fn.get()).data() : nullptr;
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          const std::size_t px = static_cast<std::size_t>(y) * W + x;
          const double* gp = g.data() + px * subpix;
          for (int s = 0; s < subpix; ++s) {
            const double gs = gp[s];
            if (gs == 0.0) continue;
            const std::size_t wbase = (px * subpix + s) * taps;
            for (int ty = 0; ty < kf; ++ty) {
              const int yy = std::clamp(y + ty - c, 0, H - 1);
              for (int tx = 0; tx < kf; ++tx) {
                const int xx = std::clamp(x + tx - c, 0, W - 1);
                const std::size_t fidx = static_cast<std::size_t>(yy) * W + xx;
                if (dw) dw[wbase + ty * kf + tx] += gs * fr2[fidx];
                if (df) df[fidx] += gs * wt2[wbase + ty * kf + tx];
              }
            }
          }
        }
      }
    };
  }
  return Tensor::wrap(node);
}

Tensor huber_loss(const Tensor& pred, const Eigen::ArrayXd& target, double delta) {
  require(pred.size() == target.size(), "huber_loss: shape mismatch");
  require(delta > 0, "huber delta must be positive");
  const Eigen::Index n = pred.size();
  const Eigen::ArrayXd err = pred.value() - target;
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e = std::abs(err[i]);
    total += e <= delta ? 0.5 * e * e : delta * e - 0.5 * delta * delta;
  }
  Eigen::ArrayXd out(1);
  out[0] = total / static_cast<double>(n);
  auto node = make_node({1}, std::move(out));
  if (pred.requires_grad()) {
    node->requires_grad = true;
    node->parents = {pred.node()};
    auto pn = pred.node();
    auto err_saved = std::make_shared<Eigen::ArrayXd>(err);
    node->backward_fn = [pn, err_saved, delta, n](const Node& self, GradStore& store) {
      const double g = store.accumulate(&self)[0] / static_cast<double>(n);
      auto& dp = store.accumulate(pn.get());
      const auto& e = *err_saved;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double v = e[i];
        dp[i] += g * (std::abs(v) <= delta ? v : (v > 0 ? delta : -delta));
      }
    };
  }
  return Tensor::wrap(node);
}

}  // namespace spadsr::ad
