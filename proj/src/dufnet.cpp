#include "spadsr/dufnet.hpp"

#include <cmath>
#include <fstream>

#include "spadsr/containers.hpp"
#include "spadsr/errors.hpp"
#include "spadsr/rng.hpp"

namespace spadsr {

using ad::Tensor;

void NetConfig::validate() const {
  if (temporal_radius < 0 || temporal_radius > 4)
    throw ConfigError("temporal_radius must be in 0..4, got " +
                      std::to_string(temporal_radius));
  if (upscale != 4 && upscale != 8)
    throw ConfigError("upscale must be 4 or 8, got " + std::to_string(upscale));
  if (base_channels < 1)
    throw ConfigError("base_channels must be positive");
  if (filter_size < 1 || filter_size % 2 == 0)
    throw ConfigError("filter_size must be odd and positive, got " +
                      std::to_string(filter_size));
  if (!(bn_eps > 0)) throw ConfigError("bn_eps must be positive");
}

namespace {

Tensor param(ad::Shape shape, double fill = 0.0) {
  return Tensor::constant(std::move(shape), fill, /*requires_grad=*/true);
}

}  // namespace

DufNet::DufNet(const NetConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int b = cfg_.base_channels;
  int c_in = 1;
  blocks_.resize(cfg_.n_blocks());
  for (auto& blk : blocks_) {
    blk.bn1_gamma = param({c_in}, 1.0);
    blk.bn1_beta = param({c_in});
    blk.conv1_w = param({1, 1, 1, c_in, b});
    blk.conv1_b = param({b});
    blk.bn2_gamma = param({b}, 1.0);
    blk.bn2_beta = param({b});
    blk.conv2_w = param({3, 3, 3, b, b});
    blk.conv2_b = param({b});
    blk.bn1_mean = Eigen::ArrayXd::Zero(c_in);
    blk.bn1_var = Eigen::ArrayXd::Ones(c_in);
    blk.bn2_mean = Eigen::ArrayXd::Zero(b);
    blk.bn2_var = Eigen::ArrayXd::Ones(b);
    c_in += b;
  }
  const int hidden = cfg_.hidden_channels();
  const int taps = cfg_.filter_size * cfg_.filter_size;
  const int subpix = cfg_.upscale * cfg_.upscale;
  filter_head_.conv1_w = param({1, 1, 1, c_in, hidden});
  filter_head_.conv1_b = param({hidden});
  filter_head_.conv2_w = param({1, 1, 1, hidden, subpix * taps});
  filter_head_.conv2_b = param({subpix * taps});
  residual_head_.conv1_w = param({1, 1, 1, c_in, hidden});
  residual_head_.conv1_b = param({hidden});
  residual_head_.conv2_w = param({1, 1, 1, hidden, subpix});
  residual_head_.conv2_b = param({subpix});
}

void DufNet::init(std::uint64_t seed) {
  auto params = parameters();
  auto names = parameter_names();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = params[i];
    const auto& shape = t.shape();
    const bool is_conv_w = shape.size() == 5;
    if (!is_conv_w) continue;  // biases zero, gammas one, betas zero (ctor)
    // Head output convs stay zero: the net starts as a softmax-uniform
    // (locally averaged) upsample with no residual.
    if (names[i] == "filter_head.conv2.w" || names[i] == "residual_head.conv2.w")
      continue;
    const int fan_in = shape[0] * shape[1] * shape[2] * shape[3];
    const double stddev = std::sqrt(2.0 / fan_in);
    RandomStream rng(seed, 0x1000 + i);
    for (Eigen::Index j = 0; j < t.size(); ++j)
      t.value()[j] = stddev * rng.next_normal();
  }
}

ad::Tensor DufNet::forward(const ad::Tensor& window, bool training,
                           std::vector<ad::BnStats>* stats_out) const {
  require(window.shape().size() == 4, "window must be [T,H,W,C]");
  require(window.shape()[0] == cfg_.window_length(),
          "window has " + std::to_string(window.shape()[0]) +
              " frames; temporal_radius " + std::to_string(cfg_.temporal_radius) +
              " needs " + std::to_string(cfg_.window_length()));
  require(window.shape()[3] == 1, "window must have one channel");

  auto bn = [&](const Tensor& x, const Tensor& gamma, const Tensor& beta,
                const Eigen::ArrayXd& mean, const Eigen::ArrayXd& var) {
    if (training) {
      ad::BnStats stats;
      Tensor y = ad::batch_norm_train(x, gamma, beta, cfg_.bn_eps,
                                      stats_out ? &stats : nullptr);
      if (stats_out) stats_out->push_back(std::move(stats));
      return y;
    }
    return ad::batch_norm_eval(x, gamma, beta, mean, var, cfg_.bn_eps);
  };

  Tensor x = window;
  for (const auto& blk : blocks_) {
    Tensor h = bn(x, blk.bn1_gamma, blk.bn1_beta, blk.bn1_mean, blk.bn1_var);
    h = ad::relu(h);
    h = ad::conv3d(h, blk.conv1_w, blk.conv1_b, ad::Pad::Replicate, ad::Pad::Zero);
    h = bn(h, blk.bn2_gamma, blk.bn2_beta, blk.bn2_mean, blk.bn2_var);
    h = ad::relu(h);
    h = ad::conv3d(h, blk.conv2_w, blk.conv2_b, ad::Pad::Replicate, ad::Pad::Zero);
    x = ad::concat_channels(x, h);
  }

  const int center = cfg_.temporal_radius;
  Tensor feat = ad::slice_time(x, center);

  auto head = [&](const HeadParams& hp) {
    Tensor h = ad::conv3d(feat, hp.conv1_w, hp.conv1_b, ad::Pad::Replicate,
                          ad::Pad::Zero);
    h = ad::relu(h);
    return ad::conv3d(h, hp.conv2_w, hp.conv2_b, ad::Pad::Replicate,
                      ad::Pad::Zero);
  };

  const int taps = cfg_.filter_size * cfg_.filter_size;
  Tensor filt = ad::softmax_last(head(filter_head_), taps);
  Tensor frame = ad::slice_time(window, center);
  Tensor up = ad::dynamic_filter_apply(filt, frame, cfg_.upscale, cfg_.filter_size);
  up = ad::depth_to_space(up, cfg_.upscale);

  Tensor res = ad::depth_to_space(head(residual_head_), cfg_.upscale);
  Tensor out = ad::add(up, res);
  return cfg_.clamp_output ? ad::clamp01(out) : out;
}

Image DufNet::infer(const std::vector<Image>& window) const {
  Tensor out = forward(window_to_tensor(window), /*training=*/false);
  return out.to_image();
}

std::vector<Tensor> DufNet::parameters() const {
  std::vector<Tensor> out;
  for (const auto& blk : blocks_) {
    out.insert(out.end(), {blk.bn1_gamma, blk.bn1_beta, blk.conv1_w, blk.conv1_b,
                           blk.bn2_gamma, blk.bn2_beta, blk.conv2_w, blk.conv2_b});
  }
  for (const auto* hp : {&filter_head_, &residual_head_})
    out.insert(out.end(), {hp->conv1_w, hp->conv1_b, hp->conv2_w, hp->conv2_b});
  return out;
}

std::vector<std::string> DufNet::parameter_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string p = "block" + std::to_string(i) + ".";
    for (const char* s : {"bn1.gamma", "bn1.beta", "conv1.w", "conv1.b",
                          "bn2.gamma", "bn2.beta", "conv2.w", "conv2.b"})
      out.push_back(p + s);
  }
  for (const char* head : {"filter_head", "residual_head"})
    for (const char* s : {"conv1.w", "conv1.b", "conv2.w", "conv2.b"})
      out.push_back(std::string(head) + "." + s);
  return out;
}

std::size_t DufNet::count_params() const {
  std::size_t n = 0;
  for (const auto& t : parameters()) n += static_cast<std::size_t>(t.size());
  return n;
}

std::size_t DufNet::count_params(const NetConfig& cfg) {
  return DufNet(cfg).count_params();
}

void DufNet::update_running_stats(const std::vector<ad::BnStats>& batch_stats,
                                  double momentum) {
  require(static_cast<int>(batch_stats.size()) == n_norm_layers(),
          "expected one BnStats per norm layer");
  std::size_t i = 0;
  auto blend = [momentum](Eigen::ArrayXd& run, const Eigen::ArrayXd& batch) {
    run = momentum * run + (1.0 - momentum) * batch;
  };
  for (auto& blk : blocks_) {
    blend(blk.bn1_mean, batch_stats[i].mean);
    blend(blk.bn1_var, batch_stats[i].var);
    ++i;
    blend(blk.bn2_mean, batch_stats[i].mean);
    blend(blk.bn2_var, batch_stats[i].var);
    ++i;
  }
}

std::vector<Eigen::ArrayXd> DufNet::snapshot() const {
  std::vector<Eigen::ArrayXd> snap;
  for (const auto& t : parameters()) snap.push_back(t.value());
  for (const auto& blk : blocks_) {
    snap.push_back(blk.bn1_mean);
    snap.push_back(blk.bn1_var);
    snap.push_back(blk.bn2_mean);
    snap.push_back(blk.bn2_var);
  }
  return snap;
}

void DufNet::restore(const std::vector<Eigen::ArrayXd>& snap) {
  auto params = parameters();
  require(snap.size() == params.size() + 4 * blocks_.size(),
          "snapshot does not match this network");
  std::size_t i = 0;
  for (auto& t : params) t.value() = snap[i++];
  for (auto& blk : blocks_) {
    blk.bn1_mean = snap[i++];
    blk.bn1_var = snap[i++];
    blk.bn2_mean = snap[i++];
    blk.bn2_var = snap[i++];
  }
}

namespace {

void put_named_array(std::ostream& os, const std::string& name,
                     const ad::Shape& shape, const Eigen::ArrayXd& data) {
  require(name.size() < 65536, "tensor name too long");
  wire::put_u16(os, static_cast<std::uint16_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  wire::put_u8(os, static_cast<std::uint8_t>(shape.size()));
  for (int e : shape) wire::put_u32(os, static_cast<std::uint32_t>(e));
  for (Eigen::Index i = 0; i < data.size(); ++i) wire::put_f64(os, data[i]);
}

std::pair<std::string, Eigen::ArrayXd> get_named_array(std::istream& is) {
  const std::uint16_t len = wire::get_u16(is);
  std::string name(len, '\0');
  is.read(name.data(), len);
  const std::uint8_t rank = wire::get_u8(is);
  Eigen::Index n = 1;
  for (int r = 0; r < rank; ++r) n *= wire::get_u32(is);
  Eigen::ArrayXd data(n);
  for (Eigen::Index i = 0; i < n; ++i) data[i] = wire::get_f64(is);
  if (!is) throw IoError("truncated checkpoint tensor '" + name + "'");
  return {std::move(name), std::move(data)};
}

}  // namespace

void DufNet::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write("DUFW", 4);
  wire::put_u16(os, 1);  // version
  wire::put_u16(os, static_cast<std::uint16_t>(cfg_.temporal_radius));
  wire::put_u16(os, static_cast<std::uint16_t>(cfg_.upscale));
  wire::put_u16(os, static_cast<std::uint16_t>(cfg_.base_channels));
  wire::put_u16(os, static_cast<std::uint16_t>(cfg_.filter_size));
  wire::put_f64(os, cfg_.bn_eps);

  auto params = parameters();
  auto names = parameter_names();
  const std::uint32_t n_stats = 4 * static_cast<std::uint32_t>(blocks_.size());
  wire::put_u32(os, static_cast<std::uint32_t>(params.size()) + n_stats);
  for (std::size_t i = 0; i < params.size(); ++i)
    put_named_array(os, names[i], params[i].shape(), params[i].value());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string p = "block" + std::to_string(i) + ".";
    const auto& blk = blocks_[i];
    auto stat = [&](const char* s, const Eigen::ArrayXd& a) {
      put_named_array(os, p + s, {static_cast<int>(a.size())}, a);
    };
    stat("bn1.running_mean", blk.bn1_mean);
    stat("bn1.running_var", blk.bn1_var);
    stat("bn2.running_mean", blk.bn2_mean);
    stat("bn2.running_var", blk.bn2_var);
  }
  if (!os) throw IoError("write failed: " + path);
}

DufNet DufNet::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  wire::expect_magic(is, "DUFW", "checkpoint " + path);
  const std::uint16_t version = wire::get_u16(is);
  if (version != 1)
    throw IoError("unsupported DUFW version " + std::to_string(version));
  NetConfig cfg;
  cfg.temporal_radius = wire::get_u16(is);
  cfg.upscale = wire::get_u16(is);
  cfg.base_channels = wire::get_u16(is);
  cfg.filter_size = wire::get_u16(is);
  cfg.bn_eps = wire::get_f64(is);
  if (!is) throw IoError("truncated checkpoint header: " + path);

  DufNet net(cfg);
  auto params = net.parameters();
  auto names = net.parameter_names();
  const std::uint32_t count = wire::get_u32(is);
  for (std::uint32_t k = 0; k < count; ++k) {
    auto [name, data] = get_named_array(is);
    bool found = false;
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) {
        if (params[i].size() != data.size())
          throw IoError("checkpoint tensor '" + name + "' has wrong size");
        params[i].value() = std::move(data);
        found = true;
        break;
      }
    }
    if (found) continue;
    for (std::size_t i = 0; i < net.blocks_.size(); ++i) {
      const std::string p = "block" + std::to_string(i) + ".";
      auto& blk = net.blocks_[i];
      if (name == p + "bn1.running_mean") blk.bn1_mean = std::move(data);
      else if (name == p + "bn1.running_var") blk.bn1_var = std::move(data);
      else if (name == p + "bn2.running_mean") blk.bn2_mean = std::move(data);
      else if (name == p + "bn2.running_var") blk.bn2_var = std::move(data);
      else continue;
      found = true;
      break;
    }
    if (!found) throw IoError("unknown checkpoint tensor '" + name + "'");
  }
  return net;
}

ad::Tensor window_to_tensor(const std::vector<Image>& frames, bool requires_grad) {
  require(!frames.empty(), "empty window");
  const int h = static_cast<int>(frames[0].rows());
  const int w = static_cast<int>(frames[0].cols());
  Eigen::ArrayXd data(static_cast<Eigen::Index>(frames.size()) * h * w);
  Eigen::Index off = 0;
  for (const auto& f : frames) {
    require(f.rows() == h && f.cols() == w, "window frames differ in size");
    data.segment(off, f.size()) = Eigen::Map<const Eigen::ArrayXd>(f.data(), f.size());
    off += f.size();
  }
  return ad::Tensor::from_data({static_cast<int>(frames.size()), h, w, 1},
                               std::move(data), requires_grad);
}

}  // namespace spadsr
