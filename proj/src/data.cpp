#include "spadsr/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "spadsr/errors.hpp"
#include "spadsr/rng.hpp"

namespace spadsr {

double normalize_depth(double meters, double d_max, std::uint64_t* clamp_count) {
  require(d_max > 0, "d_max must be positive");
  require(meters >= 0, "depth must be non-negative");
  if (meters > d_max) {
    if (clamp_count) ++*clamp_count;
    return 1.0;
  }
  return meters / d_max;
}

double denormalize_depth(double unit, double d_max) { return unit * d_max; }

Image normalize_frame(const Image& meters, double d_max, std::uint64_t* clamp_count) {
  Image out(meters.rows(), meters.cols());
  for (Eigen::Index i = 0; i < meters.size(); ++i)
    out.data()[i] = normalize_depth(meters.data()[i], d_max, clamp_count);
  return out;
}

Image denormalize_frame(const Image& unit, double d_max) { return unit * d_max; }

std::vector<int> window_indices(int n_frames, int t, int temporal_radius) {
  require(n_frames > 0, "empty sequence");
  require(t >= 0 && t < n_frames, "center frame out of range");
  require(temporal_radius >= 0, "temporal radius must be >= 0");
  std::vector<int> idx;
  idx.reserve(2 * temporal_radius + 1);
  for (int k = t - temporal_radius; k <= t + temporal_radius; ++k)
    idx.push_back(std::clamp(k, 0, n_frames - 1));
  return idx;
}

std::vector<std::size_t> shuffle_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  RandomStream rng(seed, 0x5f5e100ull);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.next_below(i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

void SplitConfig::validate() const {
  if (train_ratio < 0 || val_ratio < 0 || test_ratio < 0)
    throw ConfigError("split ratios must be non-negative");
  if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9)
    throw ConfigError("split ratios must sum to 1");
}

std::vector<ExampleRef> enumerate_examples(const std::vector<int>& frames_per_sequence) {
  std::vector<ExampleRef> out;
  for (std::size_t s = 0; s < frames_per_sequence.size(); ++s)
    for (int t = 0; t < frames_per_sequence[s]; ++t)
      out.push_back({static_cast<int>(s), t});
  return out;
}

DatasetSplit shuffle_split(const std::vector<ExampleRef>& examples,
                           const SplitConfig& cfg) {
  require(!examples.empty(), "empty example list");
  cfg.validate();

  std::vector<int> seq_ids;
  for (const auto& e : examples)
    if (std::find(seq_ids.begin(), seq_ids.end(), e.sequence) == seq_ids.end())
      seq_ids.push_back(e.sequence);
  seeded_shuffle(seq_ids, cfg.seed);

  const auto n = seq_ids.size();
  const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_ratio * n));
  const auto n_val = static_cast<std::size_t>(std::llround(cfg.val_ratio * n));
  std::map<int, int> assignment;  // 0 train, 1 val, 2 test
  for (std::size_t i = 0; i < n; ++i)
    assignment[seq_ids[i]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);

  DatasetSplit split;
  for (const auto& e : examples) {
    switch (assignment[e.sequence]) {
      case 0: split.train.push_back(e); break;
      case 1: split.val.push_back(e); break;
      default: split.test.push_back(e); break;
    }
  }
  // Only training examples are shuffled; val/test stay in video order.
  seeded_shuffle(split.train, cfg.seed ^ 0x7261696eull);
  return split;
}

DepthSequence subsample_fps(const DepthSequence& seq, int stride) {
  require(stride >= 1, "stride must be >= 1");
  DepthSequence out;
  out.fps = seq.fps / static_cast<float>(stride);
  out.d_max = seq.d_max;
  for (int t = 0; t < seq.n_frames(); t += stride) {
    out.depth.push_back(seq.depth[t]);
    if (seq.has_intensity()) out.intensity.push_back(seq.intensity[t]);
  }
  return out;
}

HistogramCube subsample_fps(const HistogramCube& cube, int stride) {
  require(stride >= 1, "stride must be >= 1");
  HistogramCube out = cube;
  out.counts.clear();
  out.n_frames = 0;
  out.fps = cube.fps / static_cast<float>(stride);
  for (int t = 0; t < cube.n_frames; t += stride) {
    const auto* src = cube.counts.data() + cube.frame_stride() * t;
    out.counts.insert(out.counts.end(), src, src + cube.frame_stride());
    ++out.n_frames;
  }
  return out;
}

TrainingExample make_example(const std::vector<SequencePair>& pairs,
                             const ExampleRef& ref, int temporal_radius) {
  require(ref.sequence >= 0 && ref.sequence < static_cast<int>(pairs.size()),
          "sequence index out of range");
  const auto& pair = pairs[ref.sequence];
  require(pair.lr.n_frames() == pair.hr.n_frames(),
          "LR/HR frame count mismatch in sequence " + pair.id);
  TrainingExample ex;
  ex.sequence = ref.sequence;
  ex.center_t = ref.center_t;
  const auto idx = window_indices(pair.lr.n_frames(), ref.center_t, temporal_radius);
  for (int i : idx)
    ex.input.push_back(normalize_frame(pair.lr.depth[i], pair.lr.d_max));
  ex.target = normalize_frame(pair.hr.depth[ref.center_t], pair.hr.d_max);
  return ex;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest: " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    ManifestEntry e;
    if (!(ss >> e.split >> e.gt_path >> e.lr_path))
      throw IoError(path + ":" + std::to_string(line_no) +
                    ": expected 'split gt_path lr_path'");
    if (e.split != "train" && e.split != "val" && e.split != "test")
      throw IoError(path + ":" + std::to_string(line_no) + ": unknown split '" +
                    e.split + "'");
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write manifest: " + path);
  for (const auto& e : entries)
    os << e.split << " " << e.gt_path << " " << e.lr_path << "\n";
  if (!os) throw IoError("short write: " + path);
}

}  // namespace spadsr
