// spadsr: desk-scale single-photon LIDAR video super-resolution workflow.
//
// Subcommands cover the full pipeline: procedural scene generation, SPAD
// histogram simulation, dataset assembly, network training, inference,
// evaluation, and the FPS / SNR / temporal-radius studies. Every command is
// deterministic given (config, seed); CSVs carry a config-hash provenance
// comment.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spadsr/baseline.hpp"
#include "spadsr/config.hpp"
#include "spadsr/containers.hpp"
#include "spadsr/data.hpp"
#include "spadsr/dufnet.hpp"
#include "spadsr/errors.hpp"
#include "spadsr/metrics.hpp"
#include "spadsr/scene.hpp"
#include "spadsr/spad.hpp"
#include "spadsr/trainer.hpp"

namespace fs = std::filesystem;
using namespace spadsr;

namespace {

struct Cli {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
};

// Registers a flag whose value lands in the config under `key`, so command
// line > config file > built-in default uniformly.
void opt(CLI::App* cmd, Cli& cli, const std::string& flag, const std::string& key,
         const std::string& desc) {
  cmd->add_option_function<std::string>(
      flag, [&cli, key](const std::string& v) { cli.overrides.emplace_back(key, v); },
      desc);
}

Config build_config(const Cli& cli) {
  Config cfg = cli.config_path.empty() ? Config() : Config::from_file(cli.config_path);
  for (const auto& [k, v] : cli.overrides) cfg.set(k, v);
  return cfg;
}

std::string zero_pad(int v, int width = 3) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*d", width, v);
  return buf;
}

OpticalParams optical_from(const Config& cfg) {
  OpticalParams p;
  p.signal_scale = cfg.get_double("spad.signal_scale", p.signal_scale);
  p.background_rate = cfg.get_double("spad.background_rate", p.background_rate);
  p.pulse_sigma = cfg.get_double("spad.pulse_sigma", p.pulse_sigma);
  p.seed = cfg.get_u64("spad.seed", p.seed);
  p.validate();
  return p;
}

NetConfig net_from(const Config& cfg) {
  NetConfig n;
  n.temporal_radius = cfg.get_int("net.tr", n.temporal_radius);
  n.upscale = cfg.get_int("net.upscale", n.upscale);
  n.base_channels = cfg.get_int("net.base_channels", n.base_channels);
  n.filter_size = cfg.get_int("net.filter_size", n.filter_size);
  n.validate();
  return n;
}

TrainConfig train_from(const Config& cfg) {
  TrainConfig t;
  t.epochs = cfg.get_int("train.epochs", t.epochs);
  t.batch_size = cfg.get_int("train.batch_size", t.batch_size);
  t.lr0 = cfg.get_double("train.lr0", t.lr0);
  t.lr_step_epochs = cfg.get_int("train.lr_step_epochs", t.lr_step_epochs);
  t.patience = cfg.get_int("train.patience", t.patience);
  t.huber_delta = cfg.get_double("train.huber_delta", t.huber_delta);
  t.seed = cfg.get_u64("train.seed", t.seed);
  t.n_threads = cfg.get_int("train.threads", t.n_threads);
  t.validate();
  return t;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  for (char c : s) {
    if (c == ',') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else {
      item += c;
    }
  }
  if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument("junk");
    } catch (const std::exception&) {
      throw ConfigError(what + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

std::vector<int> int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (double v : double_list(s, what)) {
    if (v != static_cast<int>(v)) throw ConfigError(what + ": expected integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<Image> normalized_frames(const DepthSequence& seq) {
  std::vector<Image> out;
  out.reserve(seq.depth.size());
  for (const auto& f : seq.depth) out.push_back(normalize_frame(f, seq.d_max));
  return out;
}

// Eval-mode inference over a whole normalized sequence (clamped windows at
// the edges). Returns normalized HR frames; elapsed_s gets the wall time.
std::vector<Image> infer_sequence(const DufNet& net, const std::vector<Image>& lr,
                                  double* elapsed_s = nullptr) {
  const int tr = net.config().temporal_radius;
  const int n = static_cast<int>(lr.size());
  std::vector<Image> out;
  out.reserve(lr.size());
  const auto t0 = std::chrono::steady_clock::now();
  for (int t = 0; t < n; ++t) {
    std::vector<Image> window;
    for (int idx : window_indices(n, t, tr)) window.push_back(lr[idx]);
    out.push_back(net.infer(window));
  }
  const auto t1 = std::chrono::steady_clock::now();
  if (elapsed_s) *elapsed_s = std::chrono::duration<double>(t1 - t0).count();
  return out;
}

std::vector<Image> subsample(const std::vector<Image>& frames, int stride) {
  require(stride >= 1, "stride must be positive");
  std::vector<Image> out;
  for (std::size_t t = 0; t < frames.size(); t += stride) out.push_back(frames[t]);
  return out;
}

std::ofstream open_out(const std::string& path) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty())
    fs::create_directories(parent);
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  return os;
}

struct LoadedPair {
  SequencePair pair;
  std::string split;
};

std::vector<LoadedPair> load_manifest_pairs(const std::string& manifest_path) {
  const fs::path base = fs::path(manifest_path).parent_path();
  auto resolve = [&base](const std::string& p) {
    const fs::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  std::vector<LoadedPair> out;
  for (const auto& e : read_manifest(manifest_path)) {
    LoadedPair lp;
    lp.split = e.split;
    lp.pair.hr = read_dseq(resolve(e.gt_path));
    lp.pair.lr = read_dseq(resolve(e.lr_path));
    lp.pair.id = fs::path(e.gt_path).stem().string();
    require(lp.pair.hr.n_frames() == lp.pair.lr.n_frames(),
            "manifest pair frame counts differ: " + e.gt_path);
    out.push_back(std::move(lp));
  }
  return out;
}

std::vector<TrainingExample> examples_for(const std::vector<SequencePair>& pairs,
                                          int temporal_radius) {
  std::vector<int> frames;
  for (const auto& p : pairs) frames.push_back(p.lr.n_frames());
  std::vector<TrainingExample> out;
  for (const auto& ref : enumerate_examples(frames))
    out.push_back(make_example(pairs, ref, temporal_radius));
  return out;
}

// --- commands -------------------------------------------------------------

int cmd_gen_scenes(const Config& cfg, const std::string& out_dir) {
  const int count = cfg.get_int("scene.count", 4);
  const int frames = cfg.get_int("scene.frames", 24);
  const double fps = cfg.get_double("scene.fps", 100.0);
  const double max_shift = cfg.get_double("scene.max_shift_lr_px", 0.5);
  const std::uint64_t seed = cfg.get_u64("scene.seed", 1);
  if (count < 1) throw ConfigError("scene.count must be positive");

  fs::create_directories(out_dir);
  for (int i = 0; i < count; ++i) {
    SceneSpec spec = random_scene(seed + static_cast<std::uint64_t>(i), frames,
                                  fps, max_shift);
    const std::string stem = (fs::path(out_dir) / ("scene_" + zero_pad(i))).string();
    save_scene(stem + ".txt", spec);
    write_dseq(stem + ".dseq", to_depth_sequence(render_sequence(spec)));
    std::cout << "scene " << i << ": " << spec.objects.size() << " objects, "
              << frames << " frames -> " << stem << ".dseq\n";
  }
  return 0;
}

int cmd_simulate(const Config& cfg, const std::string& input,
                 const std::string& output, const std::string& extract_path) {
  OpticalParams params = optical_from(cfg);
  const double target_snr = cfg.get_double("spad.target_snr", 1.0);
  const int threads = cfg.get_int("spad.threads", 1);
  GroundTruthSequence gt = from_depth_sequence(read_dseq(input));
  HistogramCube cube = simulate(gt, params, target_snr, threads);
  if (const auto parent = fs::path(output).parent_path(); !parent.empty())
    fs::create_directories(parent);
  write_hcub(output, cube);
  std::cout << "simulated " << cube.n_frames << " frames at " << cube.width << "x"
            << cube.height << ", target SNR " << target_snr << " -> " << output
            << "\n";
  if (!extract_path.empty())
    write_dseq(extract_path, extract_depth_sequence(cube));
  return 0;
}

int cmd_make_dataset(const Config& cfg, const std::string& scene_dir,
                     const std::string& out_dir, bool keep_hcub) {
  OpticalParams params = optical_from(cfg);
  const double target_snr = cfg.get_double("spad.target_snr", 1.0);
  const int threads = cfg.get_int("spad.threads", 1);
  const int stride = cfg.get_int("data.stride", 1);
  SplitConfig split;
  split.seed = cfg.get_u64("data.split_seed", 0);
  split.train_ratio = cfg.get_double("data.train_ratio", split.train_ratio);
  split.val_ratio = cfg.get_double("data.val_ratio", split.val_ratio);
  split.test_ratio = cfg.get_double("data.test_ratio", split.test_ratio);
  split.validate();

  std::vector<fs::path> scene_files;
  if (!fs::is_directory(scene_dir))
    throw IoError("scene directory not found: " + scene_dir);
  for (const auto& entry : fs::directory_iterator(scene_dir))
    if (entry.path().extension() == ".dseq") scene_files.push_back(entry.path());
  std::sort(scene_files.begin(), scene_files.end());
  require(!scene_files.empty(), "no .dseq files in " + scene_dir);

  fs::create_directories(out_dir);
  const int n = static_cast<int>(scene_files.size());

  // Sequence-disjoint split decided up front from seeded shuffling.
  std::vector<ExampleRef> one_per_seq;
  for (int i = 0; i < n; ++i) one_per_seq.push_back({i, 0});
  const DatasetSplit assignment = shuffle_split(one_per_seq, split);
  std::vector<std::string> split_of(n, "train");
  for (const auto& r : assignment.val) split_of[r.sequence] = "val";
  for (const auto& r : assignment.test) split_of[r.sequence] = "test";

  std::vector<ManifestEntry> manifest;
  for (int i = 0; i < n; ++i) {
    DepthSequence hr = read_dseq(scene_files[i].string());
    if (stride > 1) hr = subsample_fps(hr, stride);
    params.seed = cfg.get_u64("spad.seed", 0) + static_cast<std::uint64_t>(i);
    HistogramCube cube = simulate(from_depth_sequence(hr), params, target_snr, threads);
    DepthSequence lr = extract_depth_sequence(cube);

    const std::string stem = "seq_" + zero_pad(i);
    write_dseq((fs::path(out_dir) / (stem + ".gt.dseq")).string(), hr);
    write_dseq((fs::path(out_dir) / (stem + ".lr.dseq")).string(), lr);
    if (keep_hcub)
      write_hcub((fs::path(out_dir) / (stem + ".hcub")).string(), cube);
    manifest.push_back({split_of[i], stem + ".gt.dseq", stem + ".lr.dseq"});
    std::cout << stem << ": " << split_of[i] << ", " << hr.n_frames()
              << " frames\n";
  }
  write_manifest((fs::path(out_dir) / "manifest.txt").string(), manifest);
  return 0;
}

int cmd_train(const Config& cfg, const std::string& manifest_path,
              const std::string& model_out, const std::string& log_out) {
  NetConfig net_cfg = net_from(cfg);
  TrainConfig train_cfg = train_from(cfg);

  std::vector<SequencePair> train_pairs, val_pairs;
  for (auto& lp : load_manifest_pairs(manifest_path)) {
    if (lp.split == "train") train_pairs.push_back(std::move(lp.pair));
    else if (lp.split == "val") val_pairs.push_back(std::move(lp.pair));
  }
  require(!train_pairs.empty(), "manifest has no train sequences");
  require(!val_pairs.empty(), "manifest has no val sequences");

  const auto train_set = examples_for(train_pairs, net_cfg.temporal_radius);
  const auto val_set = examples_for(val_pairs, net_cfg.temporal_radius);
  std::cout << "training T_R=" << net_cfg.temporal_radius << " on "
            << train_set.size() << " examples, validating on " << val_set.size()
            << " (" << DufNet::count_params(net_cfg) << " parameters)\n";

  DufNet net(net_cfg);
  net.init(train_cfg.seed);
  const TrainResult result = fit(net, train_set, val_set, train_cfg, &std::cout);
  if (const auto parent = fs::path(model_out).parent_path(); !parent.empty())
    fs::create_directories(parent);
  net.save(model_out);
  std::cout << "best epoch " << result.best_epoch << " (val loss "
            << result.best_val_loss << ") -> " << model_out << "\n";
  if (!log_out.empty()) {
    auto os = open_out(log_out);
    write_train_log_csv(os, result.log, cfg.hash());
  }
  if (result.aborted) throw NumericalError("training aborted on non-finite loss");
  return 0;
}

int cmd_infer(const Config& cfg, const std::string& model_path,
              const std::string& input, const std::string& output,
              const std::string& pgm_dir) {
  (void)cfg;
  const DufNet net = DufNet::load(model_path);
  const DepthSequence lr = read_dseq(input);
  const std::vector<Image> lr_norm = normalized_frames(lr);
  double elapsed = 0.0;
  const std::vector<Image> sr_norm = infer_sequence(net, lr_norm, &elapsed);

  DepthSequence sr;
  sr.fps = lr.fps;
  sr.d_max = lr.d_max;
  for (const auto& f : sr_norm) sr.depth.push_back(denormalize_frame(f, lr.d_max));
  if (const auto parent = fs::path(output).parent_path(); !parent.empty())
    fs::create_directories(parent);
  write_dseq(output, sr);
  std::cout << "super-resolved " << sr.n_frames() << " frames ("
            << (elapsed > 0 ? sr.n_frames() / elapsed : 0.0) << " frames/s) -> "
            << output << "\n";

  if (!pgm_dir.empty()) {
    fs::create_directories(pgm_dir);
    for (int t = 0; t < sr.n_frames(); ++t)
      write_pgm16((fs::path(pgm_dir) / ("frame_" + zero_pad(t) + ".pgm")).string(),
                  sr.depth[t], sr.d_max);
  }
  return 0;
}

int cmd_evaluate(const Config& cfg, const std::string& gt_path,
                 const std::string& lr_path, const std::string& model_path,
                 const std::string& methods_csv, const std::string& out_csv,
                 const std::string& pgm_dir) {
  const double tau = cfg.get_double("eval.tau", 1e-6);
  const DepthSequence gt = read_dseq(gt_path);
  const std::vector<Image> gt_norm = normalized_frames(gt);
  const auto methods = split_list(methods_csv);
  require(!methods.empty(), "no methods requested");

  std::optional<std::vector<Image>> lr_norm;
  int r = 0;
  if (!lr_path.empty()) {
    const DepthSequence lr = read_dseq(lr_path);
    require(lr.n_frames() == gt.n_frames(), "GT and LR frame counts differ");
    require(gt.width() % lr.width() == 0 && gt.height() % lr.height() == 0,
            "GT extents must be multiples of LR extents");
    r = gt.width() / lr.width();
    require(r == gt.height() / lr.height(), "anisotropic upscale not supported");
    lr_norm = normalized_frames(lr);
  }

  auto os = open_out(out_csv);
  bool header = true;
  const std::string seq_id = fs::path(gt_path).stem().string();
  for (const auto& method : methods) {
    std::vector<Image> sr;
    double elapsed = 0.0;
    if (method == "bicubic") {
      require(lr_norm.has_value(), "method 'bicubic' needs --lr");
      const auto t0 = std::chrono::steady_clock::now();
      sr = bicubic_sequence(*lr_norm, r);
      elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                    .count();
    } else if (method == "net") {
      require(!model_path.empty(), "method 'net' needs --model");
      require(lr_norm.has_value(), "method 'net' needs --lr");
      const DufNet net = DufNet::load(model_path);
      require(net.config().upscale == r, "model upscale does not match GT/LR pair");
      sr = infer_sequence(net, *lr_norm, &elapsed);
    } else {
      throw ConfigError("unknown method '" + method + "' (expected bicubic, net)");
    }
    const MetricsReport report = evaluate_sequence(sr, gt_norm, tau, elapsed);
    write_metrics_csv(os, seq_id, method, report, cfg.hash(), header);
    header = false;
    std::cout << method << ": psnr=" << format_metric(report.mean_psnr)
              << " ssim=" << format_metric(report.mean_ssim)
              << " tc=" << report.mean_tc << " fps=" << report.throughput_fps
              << "\n";
    if (!pgm_dir.empty()) {
      fs::create_directories(pgm_dir);
      for (std::size_t t = 0; t < sr.size(); ++t)
        write_pgm16((fs::path(pgm_dir) /
                     ("error_" + method + "_" + zero_pad(static_cast<int>(t)) + ".pgm"))
                        .string(),
                    error_map(sr[t], gt_norm[t]), 1.0);
    }
  }
  return 0;
}

int cmd_study_fps(const Config& cfg, const std::string& gt_path,
                  const std::string& lr_path,
                  const std::vector<std::string>& model_specs,
                  const std::string& strides_csv, const std::string& out_csv) {
  const double tau = cfg.get_double("eval.tau", 1e-6);
  const DepthSequence gt = read_dseq(gt_path);
  const DepthSequence lr = read_dseq(lr_path);
  require(lr.n_frames() == gt.n_frames(), "GT and LR frame counts differ");
  const std::vector<Image> gt_norm = normalized_frames(gt);
  const std::vector<Image> lr_norm = normalized_frames(lr);
  const auto strides = int_list(strides_csv, "strides");

  std::vector<std::pair<std::string, DufNet>> models;
  for (const auto& spec : model_specs) {
    const auto eq = spec.find('=');
    require(eq != std::string::npos, "--model expects name=path, got '" + spec + "'");
    models.emplace_back(spec.substr(0, eq), DufNet::load(spec.substr(eq + 1)));
  }
  require(!models.empty(), "study-fps needs at least one --model name=path");

  auto os = open_out(out_csv);
  os << "# config-hash=" << cfg.hash() << "\n";
  os << "fps,stride,method,psnr,ssim,tc\n";
  for (int stride : strides) {
    require(stride >= 1, "strides must be positive");
    const auto gt_s = subsample(gt_norm, stride);
    const auto lr_s = subsample(lr_norm, stride);
    if (gt_s.size() < 2) continue;  // need a consecutive pair for Tc
    const double fps = lr.fps / stride;
    for (const auto& [name, net] : models) {
      double elapsed = 0.0;
      const auto sr = infer_sequence(net, lr_s, &elapsed);
      const MetricsReport rep = evaluate_sequence(sr, gt_s, tau, elapsed);
      os << format_metric(fps) << "," << stride << "," << name << ","
         << format_metric(rep.mean_psnr) << "," << format_metric(rep.mean_ssim)
         << "," << format_metric(rep.mean_tc) << "\n";
      std::cout << "fps=" << fps << " " << name
                << ": psnr=" << format_metric(rep.mean_psnr) << "\n";
    }
  }
  return 0;
}

int cmd_study_snr(const Config& cfg, const std::string& gt_path,
                  const std::string& model_path, const std::string& snr_csv,
                  const std::string& out_csv) {
  const double tau = cfg.get_double("eval.tau", 1e-6);
  const int threads = cfg.get_int("spad.threads", 1);
  OpticalParams params = optical_from(cfg);
  const GroundTruthSequence gt = from_depth_sequence(read_dseq(gt_path));
  std::vector<Image> gt_norm;
  for (const auto& f : gt.depth) gt_norm.push_back(normalize_frame(f, gt.d_max));
  const auto targets = double_list(snr_csv, "snr list");

  std::optional<DufNet> net;
  if (!model_path.empty()) net = DufNet::load(model_path);

  auto os = open_out(out_csv);
  os << "# config-hash=" << cfg.hash() << "\n";
  os << "snr,method,psnr,ssim,tc\n";
  for (double target : targets) {
    const HistogramCube cube = simulate(gt, params, target, threads);
    const DepthSequence lr = extract_depth_sequence(cube);
    const std::vector<Image> lr_norm = normalized_frames(lr);
    const int r = gt_norm[0].cols() / static_cast<int>(lr_norm[0].cols());

    auto emit = [&](const std::string& method, const std::vector<Image>& sr,
                    double elapsed) {
      const MetricsReport rep = evaluate_sequence(sr, gt_norm, tau, elapsed);
      os << format_metric(target) << "," << method << ","
         << format_metric(rep.mean_psnr) << "," << format_metric(rep.mean_ssim)
         << "," << format_metric(rep.mean_tc) << "\n";
      std::cout << "snr=" << target << " " << method
                << ": psnr=" << format_metric(rep.mean_psnr) << "\n";
    };
    emit("bicubic", bicubic_sequence(lr_norm, r), 0.0);
    if (net) {
      double elapsed = 0.0;
      emit("net", infer_sequence(*net, lr_norm, &elapsed), elapsed);
    }
  }
  return 0;
}

int cmd_study_tr(const Config& cfg, const std::string& manifest_path,
                 const std::string& tr_csv, const std::string& out_csv,
                 const std::string& models_dir) {
  const double tau = cfg.get_double("eval.tau", 1e-6);
  const auto tr_list = int_list(tr_csv, "tr list");
  TrainConfig train_cfg = train_from(cfg);

  std::vector<SequencePair> train_pairs, val_pairs, test_pairs;
  for (auto& lp : load_manifest_pairs(manifest_path)) {
    if (lp.split == "train") train_pairs.push_back(std::move(lp.pair));
    else if (lp.split == "val") val_pairs.push_back(std::move(lp.pair));
    else test_pairs.push_back(std::move(lp.pair));
  }
  require(!train_pairs.empty() && !val_pairs.empty() && !test_pairs.empty(),
          "study-tr needs train, val, and test sequences in the manifest");

  auto os = open_out(out_csv);
  os << "# config-hash=" << cfg.hash() << "\n";
  os << "tr,scene,psnr,ssim,tc,throughput_fps\n";
  for (int tr : tr_list) {
    NetConfig net_cfg = net_from(cfg);
    net_cfg.temporal_radius = tr;
    net_cfg.validate();
    const auto train_set = examples_for(train_pairs, tr);
    const auto val_set = examples_for(val_pairs, tr);
    std::cout << "--- T_R=" << tr << ": training on " << train_set.size()
              << " examples\n";
    DufNet net(net_cfg);
    net.init(train_cfg.seed);
    fit(net, train_set, val_set, train_cfg, &std::cout);
    if (!models_dir.empty()) {
      fs::create_directories(models_dir);
      net.save((fs::path(models_dir) / ("tr" + std::to_string(tr) + ".dufw")).string());
    }
    for (const auto& pair : test_pairs) {
      const auto lr_norm = normalized_frames(pair.lr);
      std::vector<Image> gt_norm;
      for (const auto& f : pair.hr.depth)
        gt_norm.push_back(normalize_frame(f, pair.hr.d_max));
      double elapsed = 0.0;
      const auto sr = infer_sequence(net, lr_norm, &elapsed);
      const MetricsReport rep = evaluate_sequence(sr, gt_norm, tau, elapsed);
      os << tr << "," << pair.id << "," << format_metric(rep.mean_psnr) << ","
         << format_metric(rep.mean_ssim) << "," << format_metric(rep.mean_tc)
         << "," << format_metric(rep.throughput_fps) << "\n";
      std::cout << "T_R=" << tr << " " << pair.id
                << ": psnr=" << format_metric(rep.mean_psnr)
                << " ssim=" << format_metric(rep.mean_ssim) << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"single-photon LIDAR video super-resolution workflow"};
  app.require_subcommand(1);
  Cli cli;
  app.add_option("--config", cli.config_path, "key=value config file")
      ->expected(1);

  // gen-scenes
  auto* gen = app.add_subcommand("gen-scenes", "generate procedural ground-truth scenes");
  std::string gen_out = "scenes";
  gen->add_option("--out", gen_out, "output directory");
  opt(gen, cli, "--count", "scene.count", "number of scenes");
  opt(gen, cli, "--frames", "scene.frames", "frames per scene");
  opt(gen, cli, "--fps", "scene.fps", "frame rate");
  opt(gen, cli, "--seed", "scene.seed", "base scene seed");
  opt(gen, cli, "--max-shift", "scene.max_shift_lr_px", "max LR-pixel shift per frame");

  // simulate
  auto* sim = app.add_subcommand("simulate", "SPAD histogram simulation of one scene");
  std::string sim_in, sim_out, sim_extract;
  sim->add_option("--input", sim_in, "ground-truth .dseq")->required();
  sim->add_option("--output", sim_out, "output .hcub")->required();
  sim->add_option("--extract", sim_extract, "also write extracted LR depth .dseq");
  opt(sim, cli, "--snr", "spad.target_snr", "target mean SNR (<=0 keeps B as-is)");
  opt(sim, cli, "--seed", "spad.seed", "photon noise seed");
  opt(sim, cli, "--signal-scale", "spad.signal_scale", "signal photons * m^2");
  opt(sim, cli, "--background-rate", "spad.background_rate", "background photons/bin");
  opt(sim, cli, "--pulse-sigma", "spad.pulse_sigma", "pulse spread in bins");
  opt(sim, cli, "--threads", "spad.threads", "sampling threads");

  // make-dataset
  auto* mk = app.add_subcommand("make-dataset", "simulate a scene directory and split");
  std::string mk_scenes = "scenes", mk_out = "dataset";
  bool mk_keep_hcub = false;
  mk->add_option("--scenes", mk_scenes, "directory of ground-truth .dseq files");
  mk->add_option("--out", mk_out, "output dataset directory");
  mk->add_flag("--keep-hcub", mk_keep_hcub, "also write histogram cubes");
  opt(mk, cli, "--snr", "spad.target_snr", "target mean SNR");
  opt(mk, cli, "--seed", "spad.seed", "photon noise seed (per-scene offset added)");
  opt(mk, cli, "--stride", "data.stride", "keep every k-th frame");
  opt(mk, cli, "--split-seed", "data.split_seed", "sequence split seed");
  opt(mk, cli, "--train-ratio", "data.train_ratio", "train fraction");
  opt(mk, cli, "--val-ratio", "data.val_ratio", "val fraction");
  opt(mk, cli, "--test-ratio", "data.test_ratio", "test fraction");
  opt(mk, cli, "--threads", "spad.threads", "sampling threads");

  // train
  auto* tr = app.add_subcommand("train", "train the super-resolution network");
  std::string tr_manifest, tr_model = "model.dufw", tr_log;
  tr->add_option("--manifest", tr_manifest, "dataset manifest")->required();
  tr->add_option("--out", tr_model, "output checkpoint (.dufw)");
  tr->add_option("--log", tr_log, "training log CSV");
  opt(tr, cli, "--tr", "net.tr", "temporal radius (0..4)");
  opt(tr, cli, "--base-channels", "net.base_channels", "feature width per block");
  opt(tr, cli, "--filter-size", "net.filter_size", "dynamic filter size (odd)");
  opt(tr, cli, "--upscale", "net.upscale", "upscale factor (4 or 8)");
  opt(tr, cli, "--epochs", "train.epochs", "max epochs");
  opt(tr, cli, "--batch", "train.batch_size", "batch size");
  opt(tr, cli, "--lr", "train.lr0", "initial learning rate");
  opt(tr, cli, "--patience", "train.patience", "early-stopping patience");
  opt(tr, cli, "--seed", "train.seed", "training seed");
  opt(tr, cli, "--threads", "train.threads", "batch-member threads");

  // infer
  auto* inf = app.add_subcommand("infer", "super-resolve an LR sequence");
  std::string inf_model, inf_in, inf_out = "sr.dseq", inf_pgm;
  inf->add_option("--model", inf_model, "checkpoint (.dufw)")->required();
  inf->add_option("--input", inf_in, "LR depth .dseq")->required();
  inf->add_option("--output", inf_out, "output SR .dseq");
  inf->add_option("--pgm-dir", inf_pgm, "dump frames as 16-bit PGM");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "per-frame metrics for methods");
  std::string ev_gt, ev_lr, ev_model, ev_methods = "bicubic", ev_out = "metrics.csv",
              ev_pgm;
  ev->add_option("--gt", ev_gt, "ground-truth HR .dseq")->required();
  ev->add_option("--lr", ev_lr, "LR input .dseq");
  ev->add_option("--model", ev_model, "checkpoint for method 'net'");
  ev->add_option("--methods", ev_methods, "comma list: bicubic,net");
  ev->add_option("--out", ev_out, "output CSV");
  ev->add_option("--pgm-dir", ev_pgm, "dump error maps as 16-bit PGM");
  opt(ev, cli, "--tau", "eval.tau", "temporal-coherence motion tolerance");

  // study-fps
  auto* sf = app.add_subcommand("study-fps", "frame-rate sweep over strides");
  std::string sf_gt, sf_lr, sf_strides = "1,2,4,5,10,20,25,50,100",
              sf_out = "study_fps.csv";
  std::vector<std::string> sf_models;
  sf->add_option("--gt", sf_gt, "ground-truth HR .dseq")->required();
  sf->add_option("--lr", sf_lr, "LR input .dseq")->required();
  sf->add_option("--model", sf_models, "model as name=path (repeatable)");
  sf->add_option("--strides", sf_strides, "comma list of strides");
  sf->add_option("--out", sf_out, "output CSV");
  opt(sf, cli, "--tau", "eval.tau", "temporal-coherence motion tolerance");

  // study-snr
  auto* ss = app.add_subcommand("study-snr", "noise-level sweep");
  std::string ss_gt, ss_model, ss_levels = "0.25,0.34,0.5,0.75,1,10",
              ss_out = "study_snr.csv";
  ss->add_option("--gt", ss_gt, "ground-truth HR .dseq")->required();
  ss->add_option("--model", ss_model, "checkpoint for method 'net'");
  ss->add_option("--snr-list", ss_levels, "comma list of target SNRs");
  ss->add_option("--out", ss_out, "output CSV");
  opt(ss, cli, "--seed", "spad.seed", "photon noise seed");
  opt(ss, cli, "--threads", "spad.threads", "sampling threads");

  // study-tr
  auto* st = app.add_subcommand("study-tr", "temporal-radius sweep (train + evaluate)");
  std::string st_manifest, st_trs = "0,1,2,3,4", st_out = "study_tr.csv", st_models;
  st->add_option("--manifest", st_manifest, "dataset manifest")->required();
  st->add_option("--tr-list", st_trs, "comma list of temporal radii");
  st->add_option("--out", st_out, "output CSV");
  st->add_option("--models-dir", st_models, "save each trained model here");
  opt(st, cli, "--base-channels", "net.base_channels", "feature width per block");
  opt(st, cli, "--filter-size", "net.filter_size", "dynamic filter size (odd)");
  opt(st, cli, "--epochs", "train.epochs", "max epochs");
  opt(st, cli, "--batch", "train.batch_size", "batch size");
  opt(st, cli, "--seed", "train.seed", "training seed");
  opt(st, cli, "--threads", "train.threads", "batch-member threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    const Config cfg = build_config(cli);
    if (gen->parsed()) return cmd_gen_scenes(cfg, gen_out);
    if (sim->parsed()) return cmd_simulate(cfg, sim_in, sim_out, sim_extract);
    if (mk->parsed()) return cmd_make_dataset(cfg, mk_scenes, mk_out, mk_keep_hcub);
    if (tr->parsed()) return cmd_train(cfg, tr_manifest, tr_model, tr_log);
    if (inf->parsed()) return cmd_infer(cfg, inf_model, inf_in, inf_out, inf_pgm);
    if (ev->parsed())
      return cmd_evaluate(cfg, ev_gt, ev_lr, ev_model, ev_methods, ev_out, ev_pgm);
    if (sf->parsed())
      return cmd_study_fps(cfg, sf_gt, sf_lr, sf_models, sf_strides, sf_out);
    if (ss->parsed()) return cmd_study_snr(cfg, ss_gt, ss_model, ss_levels, ss_out);
    if (st->parsed()) return cmd_study_tr(cfg, st_manifest, st_trs, st_out, st_models);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  }
}
