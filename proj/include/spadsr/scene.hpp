#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "spadsr/containers.hpp"
#include "spadsr/image.hpp"

namespace spadsr {

// Procedural ground-truth generator. Scenes are a handful of primitives with
// linear motion, ray-cast through a pinhole camera. Depth is z-depth
// (perpendicular distance), the convention of game-engine depth buffers.

enum class PrimitiveKind { Plane, Box, Sphere };

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::Box;
  // Sphere: radius. Box: edge length. Plane (fronto-parallel square): edge
  // length, 0 meaning infinite extent.
  double size = 1.0;
  double reflectance = 0.5;        // [0.05, 1]
  Eigen::Vector3d position{0, 0, 10};  // center, meters; +z into the scene
  Eigen::Vector3d velocity{0, 0, 0};   // meters/second

  Eigen::Vector3d position_at(double t_seconds) const {
    return position + velocity * t_seconds;
  }
};

struct CameraSpec {
  double fov_deg = 30.0;  // horizontal field of view
  int width = 256;
  int height = 128;
};

struct SceneSpec {
  std::vector<Primitive> objects;
  double background_depth = 35.0;      // meters; valid far plane, not a sentinel
  double background_reflectance = 0.3;
  CameraSpec camera;
  double fps = 100.0;
  int n_frames = 1;
  std::uint64_t seed = 0;

  /// Throws ConfigError on degenerate values.
  void validate() const;
};

struct GroundTruthSequence {
  std::vector<Image> depth;      // meters, H x W
  std::vector<Image> intensity;  // [0, 1]
  double fps = 0.0;
  double d_max = 35.0;

  int n_frames() const { return static_cast<int>(depth.size()); }
};

std::pair<Image, Image> render_frame(const SceneSpec& spec, int t);
GroundTruthSequence render_sequence(const SceneSpec& spec);

/// Horizontal pixels per meter at depth d for a pinhole camera.
double pixels_per_meter(double depth_m, double fov_deg, int width_px);

SceneSpec load_scene(const std::string& path);
void save_scene(const std::string& path, const SceneSpec& spec);

/// Seeded procedural scene: a few boxes/spheres over the far plane, with
/// lateral speeds capped so inter-frame shifts stay below max_shift_lr_px
/// (in low-resolution pixels, assuming an upscale factor of 4).
SceneSpec random_scene(std::uint64_t seed, int n_frames, double fps,
                       double max_shift_lr_px = 0.5);

DepthSequence to_depth_sequence(const GroundTruthSequence& gt);
GroundTruthSequence from_depth_sequence(const DepthSequence& seq);

}  // namespace spadsr
