#include "spadsr/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "spadsr/errors.hpp"
#include "spadsr/rng.hpp"

namespace spadsr {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Rays are s * (u, v, 1), so the parameter s equals z-depth directly.
struct Ray {
  double u, v;
};

double intersect_plane(const Ray& ray, const Primitive& p, const Eigen::Vector3d& c) {
  const double s = c.z();
  if (s <= 0.0) return -1.0;
  if (p.size > 0.0) {
    const double half = 0.5 * p.size;
    const double x = s * ray.u, y = s * ray.v;
    if (std::abs(x - c.x()) > half || std::abs(y - c.y()) > half) return -1.0;
  }
  return s;
}

double intersect_sphere(const Ray& ray, const Primitive& p, const Eigen::Vector3d& c) {
  const Eigen::Vector3d d(ray.u, ray.v, 1.0);
  const double a = d.squaredNorm();
  const double b = -2.0 * d.dot(c);
  const double cc = c.squaredNorm() - p.size * p.size;
  const double disc = b * b - 4.0 * a * cc;
  if (disc < 0.0) return -1.0;
  const double sq = std::sqrt(disc);
  const double s0 = (-b - sq) / (2.0 * a);
  if (s0 > 0.0) return s0;
  return -1.0;  // camera inside or sphere behind
}

double intersect_box(const Ray& ray, const Primitive& p, const Eigen::Vector3d& c) {
  const double half = 0.5 * p.size;
  const Eigen::Vector3d d(ray.u, ray.v, 1.0);
  double s_enter = -std::numeric_limits<double>::infinity();
  double s_exit = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    const double lo = c[axis] - half, hi = c[axis] + half;
    if (d[axis] == 0.0) {
      if (0.0 < lo || 0.0 > hi) return -1.0;  // ray origin is (0,0,0)
      continue;
    }
    double t0 = lo / d[axis], t1 = hi / d[axis];
    if (t0 > t1) std::swap(t0, t1);
    s_enter = std::max(s_enter, t0);
    s_exit = std::min(s_exit, t1);
  }
  if (s_enter > s_exit || s_enter <= 0.0) return -1.0;
  return s_enter;
}

double intersect(const Ray& ray, const Primitive& p, double t_seconds) {
  const Eigen::Vector3d c = p.position_at(t_seconds);
  switch (p.kind) {
    case PrimitiveKind::Plane: return intersect_plane(ray, p, c);
    case PrimitiveKind::Sphere: return intersect_sphere(ray, p, c);
    case PrimitiveKind::Box: return intersect_box(ray, p, c);
  }
  return -1.0;
}

std::string kind_name(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::Plane: return "plane";
    case PrimitiveKind::Sphere: return "sphere";
    case PrimitiveKind::Box: return "box";
  }
  return "?";
}

PrimitiveKind kind_from_name(const std::string& s) {
  if (s == "plane") return PrimitiveKind::Plane;
  if (s == "sphere") return PrimitiveKind::Sphere;
  if (s == "box") return PrimitiveKind::Box;
  throw ConfigError("unknown primitive kind: " + s);
}

}  // namespace

void SceneSpec::validate() const {
  if (background_depth <= 0) throw ConfigError("background_depth must be positive");
  if (fps <= 0) throw ConfigError("fps must be positive");
  if (n_frames <= 0) throw ConfigError("n_frames must be positive");
  if (camera.width <= 0 || camera.height <= 0 || camera.width % 4 != 0 ||
      camera.height % 4 != 0)
    throw ConfigError("camera resolution must be positive and a multiple of 4");
  if (camera.fov_deg <= 0 || camera.fov_deg >= 180)
    throw ConfigError("fov_deg must be in (0, 180)");
  for (const auto& o : objects) {
    const bool size_ok =
        o.kind == PrimitiveKind::Plane ? o.size >= 0.0 : o.size > 0.0;
    if (!size_ok) throw ConfigError("zero-size " + kind_name(o.kind));
    if (o.position.z() <= 0.0 || o.position.z() > background_depth)
      throw ConfigError("object depth must lie in (0, background_depth]");
    if (o.reflectance < 0.05 || o.reflectance > 1.0)
      throw ConfigError("reflectance must lie in [0.05, 1]");
  }
}

std::pair<Image, Image> render_frame(const SceneSpec& spec, int t) {
  spec.validate();
  require(t >= 0 && t < spec.n_frames, "frame index out of range");
  const int w = spec.camera.width, h = spec.camera.height;
  const double pitch = 2.0 * std::tan(0.5 * spec.camera.fov_deg * kPi / 180.0) / w;
  const double t_seconds = t / spec.fps;

  Image depth(h, w), intensity(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Ray ray{(x + 0.5 - 0.5 * w) * pitch, (y + 0.5 - 0.5 * h) * pitch};
      double best = spec.background_depth;
      double rho = spec.background_reflectance;
      for (const auto& obj : spec.objects) {
        const double s = intersect(ray, obj, t_seconds);
        if (s > 0.0 && s < best) {
          best = s;
          rho = obj.reflectance;
        }
      }
      depth(y, x) = best;
      intensity(y, x) = rho;
    }
  }
  return {std::move(depth), std::move(intensity)};
}

GroundTruthSequence render_sequence(const SceneSpec& spec) {
  spec.validate();
  GroundTruthSequence seq;
  seq.fps = spec.fps;
  seq.d_max = spec.background_depth;
  seq.depth.reserve(spec.n_frames);
  seq.intensity.reserve(spec.n_frames);
  for (int t = 0; t < spec.n_frames; ++t) {
    auto [d, i] = render_frame(spec, t);
    seq.depth.push_back(std::move(d));
    seq.intensity.push_back(std::move(i));
  }
  return seq;
}

double pixels_per_meter(double depth_m, double fov_deg, int width_px) {
  require(depth_m > 0, "depth must be positive");
  return width_px / (2.0 * depth_m * std::tan(0.5 * fov_deg * kPi / 180.0));
}

SceneSpec random_scene(std::uint64_t seed, int n_frames, double fps,
                       double max_shift_lr_px) {
  RandomStream rng(seed, 0x5ce7e5u);
  SceneSpec spec;
  spec.seed = seed;
  spec.n_frames = n_frames;
  spec.fps = fps;

  const int n_objects = 2 + static_cast<int>(rng.next_below(3));
  const int lr_width = spec.camera.width / 4;
  for (int i = 0; i < n_objects; ++i) {
    Primitive p;
    p.kind = rng.next_double() < 0.5 ? PrimitiveKind::Box : PrimitiveKind::Sphere;
    const double z = 5.0 + 13.0 * rng.next_double();
    const double extent = z * std::tan(0.5 * spec.camera.fov_deg * kPi / 180.0);
    p.size = 0.6 + 1.8 * rng.next_double();
    p.reflectance = 0.15 + 0.85 * rng.next_double();
    p.position = {(2.0 * rng.next_double() - 1.0) * 0.7 * extent,
                  (2.0 * rng.next_double() - 1.0) * 0.35 * extent, z};
    // Lateral speed capped by the requested per-frame shift at this depth.
    const double ppm = pixels_per_meter(z, spec.camera.fov_deg, lr_width);
    const double v_max = max_shift_lr_px * fps / ppm;
    const double v = v_max * (0.15 + 0.85 * rng.next_double());
    const double dir = rng.next_double() < 0.5 ? -1.0 : 1.0;
    const double vy = v * 0.3 * (2.0 * rng.next_double() - 1.0);
    p.velocity = {dir * v, vy, 0.0};
    spec.objects.push_back(p);
  }
  return spec;
}

SceneSpec load_scene(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open scene file: " + path);
  SceneSpec spec;
  Primitive* current = nullptr;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // trim
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    if (line == "[object]") {
      spec.objects.emplace_back();
      current = &spec.objects.back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    auto num = [&](const std::string& v) {
      try {
        return std::stod(v);
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": bad number '" + v + "'");
      }
    };
    auto vec3 = [&](const std::string& v) {
      std::istringstream ss(v);
      Eigen::Vector3d out;
      if (!(ss >> out.x() >> out.y() >> out.z()))
        throw ConfigError(path + ":" + std::to_string(line_no) + ": expected three numbers");
      return out;
    };
    if (current) {
      if (key == "kind") current->kind = kind_from_name(value);
      else if (key == "size") current->size = num(value);
      else if (key == "reflectance") current->reflectance = num(value);
      else if (key == "position") current->position = vec3(value);
      else if (key == "velocity") current->velocity = vec3(value);
      else throw ConfigError(path + ": unknown object key '" + key + "'");
    } else {
      if (key == "fps") spec.fps = num(value);
      else if (key == "n_frames") spec.n_frames = static_cast<int>(num(value));
      else if (key == "background_depth") spec.background_depth = num(value);
      else if (key == "background_reflectance") spec.background_reflectance = num(value);
      else if (key == "fov_deg") spec.camera.fov_deg = num(value);
      else if (key == "width") spec.camera.width = static_cast<int>(num(value));
      else if (key == "height") spec.camera.height = static_cast<int>(num(value));
      else if (key == "seed") spec.seed = static_cast<std::uint64_t>(num(value));
      else throw ConfigError(path + ": unknown scene key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

void save_scene(const std::string& path, const SceneSpec& spec) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write scene file: " + path);
  os.precision(17);
  os << "fps=" << spec.fps << "\n";
  os << "n_frames=" << spec.n_frames << "\n";
  os << "width=" << spec.camera.width << "\n";
  os << "height=" << spec.camera.height << "\n";
  os << "fov_deg=" << spec.camera.fov_deg << "\n";
  os << "background_depth=" << spec.background_depth << "\n";
  os << "background_reflectance=" << spec.background_reflectance << "\n";
  os << "seed=" << spec.seed << "\n";
  for (const auto& o : spec.objects) {
    os << "[object]\n";
    os << "kind=" << kind_name(o.kind) << "\n";
    os << "size=" << o.size << "\n";
    os << "reflectance=" << o.reflectance << "\n";
    os << "position=" << o.position.x() << " " << o.position.y() << " "
       << o.position.z() << "\n";
    os << "velocity=" << o.velocity.x() << " " << o.velocity.y() << " "
       << o.velocity.z() << "\n";
  }
  if (!os) throw IoError("short write: " + path);
}

DepthSequence to_depth_sequence(const GroundTruthSequence& gt) {
  DepthSequence seq;
  seq.fps = static_cast<float>(gt.fps);
  seq.d_max = static_cast<float>(gt.d_max);
  seq.depth = gt.depth;
  seq.intensity = gt.intensity;
  return seq;
}

GroundTruthSequence from_depth_sequence(const DepthSequence& seq) {
  GroundTruthSequence gt;
  gt.fps = seq.fps;
  gt.d_max = seq.d_max;
  gt.depth = seq.depth;
  gt.intensity = seq.intensity;
  return gt;
}

}  // namespace spadsr
