#include "spadsr/containers.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "spadsr/errors.hpp"

namespace spadsr {
namespace wire {

namespace {

template <class T>
void put_le(std::ostream& os, T v) {
  static_assert(std::endian::native == std::endian::little,
                "byte-swapping writer not implemented for big-endian hosts");
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  os.write(buf, sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  char buf[sizeof(T)];
  is.read(buf, sizeof(T));
  if (!is) throw IoError("unexpected end of container file");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void put_u16(std::ostream& os, std::uint16_t v) { put_le(os, v); }
void put_u32(std::ostream& os, std::uint32_t v) { put_le(os, v); }
void put_f32(std::ostream& os, float v) { put_le(os, v); }
void put_f64(std::ostream& os, double v) { put_le(os, v); }
void put_u8(std::ostream& os, std::uint8_t v) { put_le(os, v); }
std::uint16_t get_u16(std::istream& is) { return get_le<std::uint16_t>(is); }
std::uint32_t get_u32(std::istream& is) { return get_le<std::uint32_t>(is); }
float get_f32(std::istream& is) { return get_le<float>(is); }
double get_f64(std::istream& is) { return get_le<double>(is); }
std::uint8_t get_u8(std::istream& is) { return get_le<std::uint8_t>(is); }

void expect_magic(std::istream& is, const char magic[4], const std::string& what) {
  char buf[4] = {0, 0, 0, 0};
  is.read(buf, 4);
  if (!is || std::memcmp(buf, magic, 4) != 0)
    throw IoError("bad magic, not a " + what + " file");
}

}  // namespace wire

namespace {

constexpr std::uint16_t kDseqVersion = 1;
constexpr std::uint16_t kHcubVersion = 1;

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  return is;
}

void write_plane_f32(std::ostream& os, const Image& img) {
  const ImageF f = img.cast<float>();
  os.write(reinterpret_cast<const char*>(f.data()),
           static_cast<std::streamsize>(sizeof(float)) * f.size());
}

Image read_plane_f32(std::istream& is, int h, int w) {
  ImageF f(h, w);
  is.read(reinterpret_cast<char*>(f.data()),
          static_cast<std::streamsize>(sizeof(float)) * f.size());
  if (!is) throw IoError("truncated DSEQ payload");
  return f.cast<double>();
}

}  // namespace

void write_dseq(const std::string& path, const DepthSequence& seq) {
  require(!seq.depth.empty(), "DSEQ: empty sequence");
  const int channels = seq.has_intensity() ? 2 : 1;
  if (channels == 2)
    require(seq.intensity.size() == seq.depth.size(),
            "DSEQ: intensity/depth frame count mismatch");
  auto os = open_out(path);
  os.write("DSEQ", 4);
  wire::put_u16(os, kDseqVersion);
  wire::put_u32(os, static_cast<std::uint32_t>(seq.width()));
  wire::put_u32(os, static_cast<std::uint32_t>(seq.height()));
  wire::put_u32(os, static_cast<std::uint32_t>(seq.n_frames()));
  wire::put_u8(os, static_cast<std::uint8_t>(channels));
  wire::put_f32(os, seq.fps);
  wire::put_f32(os, seq.d_max);
  for (int t = 0; t < seq.n_frames(); ++t) {
    write_plane_f32(os, seq.depth[t]);
    if (channels == 2) write_plane_f32(os, seq.intensity[t]);
  }
  if (!os) throw IoError("short write: " + path);
}

DepthSequence read_dseq(const std::string& path) {
  auto is = open_in(path);
  wire::expect_magic(is, "DSEQ", "DSEQ");
  const auto version = wire::get_u16(is);
  if (version != kDseqVersion)
    throw IoError("unsupported DSEQ version " + std::to_string(version));
  const int w = static_cast<int>(wire::get_u32(is));
  const int h = static_cast<int>(wire::get_u32(is));
  const int n = static_cast<int>(wire::get_u32(is));
  const int channels = wire::get_u8(is);
  if (w <= 0 || h <= 0 || n <= 0 || (channels != 1 && channels != 2))
    throw IoError("invalid DSEQ header");
  DepthSequence seq;
  seq.fps = wire::get_f32(is);
  seq.d_max = wire::get_f32(is);
  seq.depth.reserve(n);
  if (channels == 2) seq.intensity.reserve(n);
  for (int t = 0; t < n; ++t) {
    seq.depth.push_back(read_plane_f32(is, h, w));
    if (channels == 2) seq.intensity.push_back(read_plane_f32(is, h, w));
  }
  return seq;
}

void write_hcub(const std::string& path, const HistogramCube& cube) {
  require(cube.counts.size() == cube.frame_stride() * cube.n_frames,
          "HCUB: payload size does not match header");
  auto os = open_out(path);
  os.write("HCUB", 4);
  wire::put_u16(os, kHcubVersion);
  wire::put_u32(os, static_cast<std::uint32_t>(cube.width));
  wire::put_u32(os, static_cast<std::uint32_t>(cube.height));
  wire::put_u32(os, static_cast<std::uint32_t>(cube.n_frames));
  wire::put_u16(os, static_cast<std::uint16_t>(cube.n_bins));
  wire::put_f32(os, cube.bin_width);
  wire::put_f32(os, cube.d_max);
  wire::put_f32(os, cube.fps);
  wire::put_f32(os, cube.target_snr);
  os.write(reinterpret_cast<const char*>(cube.counts.data()),
           static_cast<std::streamsize>(sizeof(std::uint32_t)) * cube.counts.size());
  if (!os) throw IoError("short write: " + path);
}

HistogramCube read_hcub(const std::string& path) {
  auto is = open_in(path);
  wire::expect_magic(is, "HCUB", "HCUB");
  const auto version = wire::get_u16(is);
  if (version != kHcubVersion)
    throw IoError("unsupported HCUB version " + std::to_string(version));
  HistogramCube cube;
  cube.width = static_cast<int>(wire::get_u32(is));
  cube.height = static_cast<int>(wire::get_u32(is));
  cube.n_frames = static_cast<int>(wire::get_u32(is));
  cube.n_bins = wire::get_u16(is);
  cube.bin_width = wire::get_f32(is);
  cube.d_max = wire::get_f32(is);
  cube.fps = wire::get_f32(is);
  cube.target_snr = wire::get_f32(is);
  if (cube.width <= 0 || cube.height <= 0 || cube.n_frames <= 0 || cube.n_bins < 2)
    throw IoError("invalid HCUB header");
  cube.counts.resize(cube.frame_stride() * cube.n_frames);
  is.read(reinterpret_cast<char*>(cube.counts.data()),
          static_cast<std::streamsize>(sizeof(std::uint32_t)) * cube.counts.size());
  if (!is) throw IoError("truncated HCUB payload");
  return cube;
}

void write_pgm16(const std::string& path, const Image& depth_m, double d_max) {
  require(d_max > 0, "PGM: d_max must be positive");
  auto os = open_out(path);
  os << "P5\n" << depth_m.cols() << " " << depth_m.rows() << "\n65535\n";
  for (Eigen::Index i = 0; i < depth_m.size(); ++i) {
    double u = depth_m.data()[i] / d_max;
    u = u < 0.0 ? 0.0 : (u > 1.0 ? 1.0 : u);
    const auto v = static_cast<std::uint16_t>(u * 65535.0 + 0.5);
    // PGM stores the most significant byte first.
    const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
    os.write(bytes, 2);
  }
  if (!os) throw IoError("short write: " + path);
}

}  // namespace spadsr
