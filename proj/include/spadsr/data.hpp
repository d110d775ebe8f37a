#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spadsr/containers.hpp"
#include "spadsr/image.hpp"

namespace spadsr {

// Dataset assembly: depth normalization, temporal windowing with edge
// padding, sequence-disjoint splits with seeded shuffling, FPS subsampling.

/// meters -> [0, 1]. Values above d_max clamp; *clamp_count (optional) is
/// incremented once per clamped value.
double normalize_depth(double meters, double d_max, std::uint64_t* clamp_count = nullptr);
double denormalize_depth(double unit, double d_max);
Image normalize_frame(const Image& meters, double d_max, std::uint64_t* clamp_count = nullptr);
Image denormalize_frame(const Image& unit, double d_max);

/// Indices t-TR .. t+TR, clamped to [0, n_frames-1]; length 2*TR+1.
std::vector<int> window_indices(int n_frames, int t, int temporal_radius);

/// Seeded in-place Fisher-Yates.
template <class T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed);

struct SplitConfig {
  std::uint64_t seed = 0;
  double train_ratio = 0.6;
  double val_ratio = 0.2;
  double test_ratio = 0.2;

  void validate() const;
};

/// One training example: a window of LR frames around center_t in sequence
/// `sequence`, targeting the HR ground-truth center frame.
struct ExampleRef {
  int sequence = 0;
  int center_t = 0;
};

struct DatasetSplit {
  std::vector<ExampleRef> train;  // shuffled
  std::vector<ExampleRef> val;    // sequence order
  std::vector<ExampleRef> test;   // sequence order
};

/// Splits examples by sequence id (sequences are shuffled by cfg.seed and
/// partitioned by the ratios), then shuffles the training examples.
DatasetSplit shuffle_split(const std::vector<ExampleRef>& examples,
                           const SplitConfig& cfg);

/// All windows of a set of sequences, stride 1.
std::vector<ExampleRef> enumerate_examples(const std::vector<int>& frames_per_sequence);

/// Keep frames 0, k, 2k, ...; fps divides by k.
DepthSequence subsample_fps(const DepthSequence& seq, int stride);
HistogramCube subsample_fps(const HistogramCube& cube, int stride);

/// Aligned (LR input, HR ground truth) pair, both in meters.
struct SequencePair {
  DepthSequence lr;
  DepthSequence hr;
  std::string id;
};

/// Materialized training example (normalized values).
struct TrainingExample {
  std::vector<Image> input;  // 2*TR+1 LR frames in [0,1]
  Image target;              // HR center frame in [0,1]
  int sequence = 0;
  int center_t = 0;
  double snr = 0.0;
};

TrainingExample make_example(const std::vector<SequencePair>& pairs,
                             const ExampleRef& ref, int temporal_radius);

// --- manifest: a text file listing split assignments and container paths ---
struct ManifestEntry {
  std::string split;  // train / val / test
  std::string gt_path;
  std::string lr_path;
};
std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

/// Fisher-Yates permutation of 0..n-1 driven by a counter-based stream.
std::vector<std::size_t> shuffle_permutation(std::size_t n, std::uint64_t seed);

template <class T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  const auto perm = shuffle_permutation(items.size(), seed);
  std::vector<T> tmp;
  tmp.reserve(items.size());
  for (auto i : perm) tmp.push_back(std::move(items[i]));
  items = std::move(tmp);
}

}  // namespace spadsr
