#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "spadsr/image.hpp"

namespace spadsr {

// Little-endian binary containers. DSEQ holds float32 frame sequences
// (depth, optionally depth+intensity); HCUB holds uint32 photon-count
// histograms. Both round-trip bit-exactly.

struct DepthSequence {
  std::vector<Image> depth;       // meters, H x W
  std::vector<Image> intensity;   // same shape; empty when channels == 1
  float fps = 0.f;
  float d_max = 35.f;

  int n_frames() const { return static_cast<int>(depth.size()); }
  int height() const { return depth.empty() ? 0 : static_cast<int>(depth[0].rows()); }
  int width() const { return depth.empty() ? 0 : static_cast<int>(depth[0].cols()); }
  bool has_intensity() const { return !intensity.empty(); }
};

struct HistogramCube {
  int width = 0;
  int height = 0;
  int n_frames = 0;
  int n_bins = 16;
  float bin_width = 0.f;
  float d_max = 35.f;
  float fps = 0.f;
  float target_snr = 0.f;
  // frame-major, row-major, bin-innermost
  std::vector<std::uint32_t> counts;

  std::size_t frame_stride() const {
    return static_cast<std::size_t>(width) * height * n_bins;
  }
  const std::uint32_t* pixel(int frame, int y, int x) const {
    return counts.data() + frame_stride() * frame +
           (static_cast<std::size_t>(y) * width + x) * n_bins;
  }
  std::uint32_t* pixel(int frame, int y, int x) {
    return counts.data() + frame_stride() * frame +
           (static_cast<std::size_t>(y) * width + x) * n_bins;
  }
};

void write_dseq(const std::string& path, const DepthSequence& seq);
DepthSequence read_dseq(const std::string& path);

void write_hcub(const std::string& path, const HistogramCube& cube);
HistogramCube read_hcub(const std::string& path);

/// 16-bit binary PGM with linear mapping [0, d_max] -> [0, 65535].
void write_pgm16(const std::string& path, const Image& depth_m, double d_max);

// Low-level little-endian helpers, shared with the DUFW checkpoint writer.
namespace wire {
void put_u16(std::ostream& os, std::uint16_t v);
void put_u32(std::ostream& os, std::uint32_t v);
void put_f32(std::ostream& os, float v);
void put_f64(std::ostream& os, double v);
void put_u8(std::ostream& os, std::uint8_t v);
std::uint16_t get_u16(std::istream& is);
std::uint32_t get_u32(std::istream& is);
float get_f32(std::istream& is);
double get_f64(std::istream& is);
std::uint8_t get_u8(std::istream& is);
void expect_magic(std::istream& is, const char magic[4], const std::string& what);
}  // namespace wire

}  // namespace spadsr
