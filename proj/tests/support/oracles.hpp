#pragma once

// Independent reference implementations used only by tests: deliberately
// naive (direct loops, no shared code with the library) so they can serve
// as oracles for the optimized paths.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "spadsr/image.hpp"

namespace oracle {

// Direct 7-loop 3-D convolution, stride 1, same extents. Layouts match the
// library: x [T,H,W,Ci], w [kt,kh,kw,Ci,Co], out [T,H,W,Co]. pad_t / pad_s:
// true = replicate, false = zero.
inline std::vector<double> conv3d(const std::vector<double>& x, int T, int H,
                                  int W, int Ci, const std::vector<double>& w,
                                  int kt, int kh, int kw, int Co,
                                  const std::vector<double>& bias, bool rep_t,
                                  bool rep_s) {
  std::vector<double> out(static_cast<std::size_t>(T) * H * W * Co, 0.0);
  const int ct = kt / 2, ch = kh / 2, cw = kw / 2;
  for (int t = 0; t < T; ++t)
    for (int y = 0; y < H; ++y)
      for (int x0 = 0; x0 < W; ++x0)
        for (int co = 0; co < Co; ++co) {
          double acc = bias[co];
          for (int dt = 0; dt < kt; ++dt)
            for (int dy = 0; dy < kh; ++dy)
              for (int dx = 0; dx < kw; ++dx)
                for (int ci = 0; ci < Ci; ++ci) {
                  int tt = t + dt - ct, yy = y + dy - ch, xx = x0 + dx - cw;
                  if (tt < 0 || tt >= T) {
                    if (!rep_t) continue;
                    tt = std::clamp(tt, 0, T - 1);
                  }
                  if (yy < 0 || yy >= H || xx < 0 || xx >= W) {
                    if (!rep_s) continue;
                    yy = std::clamp(yy, 0, H - 1);
                    xx = std::clamp(xx, 0, W - 1);
                  }
                  const double xv =
                      x[((static_cast<std::size_t>(tt) * H + yy) * W + xx) * Ci + ci];
                  const double wv =
                      w[(((static_cast<std::size_t>(dt) * kh + dy) * kw + dx) * Ci +
                         ci) *
                            Co +
                        co];
                  acc += xv * wv;
                }
          out[((static_cast<std::size_t>(t) * H + y) * W + x0) * Co + co] = acc;
        }
  return out;
}

inline double cubic(double t) {
  const double a = -0.5;
  const double x = std::abs(t);
  if (x <= 1.0) return ((a + 2) * x - (a + 3)) * x * x + 1;
  if (x < 2.0) return (((x - 5) * x + 8) * x - 4) * a;
  return 0.0;
}

// Direct (non-separable) bicubic evaluation: per output pixel, a 4x4
// double sum of kernel products over clamped source indices.
inline spadsr::Image bicubic(const spadsr::Image& src, int r) {
  const Eigen::Index h = src.rows(), w = src.cols();
  spadsr::Image out(h * r, w * r);
  for (Eigen::Index oy = 0; oy < h * r; ++oy)
    for (Eigen::Index ox = 0; ox < w * r; ++ox) {
      const double sy = (oy + 0.5) / r - 0.5;
      const double sx = (ox + 0.5) / r - 0.5;
      const Eigen::Index iy = static_cast<Eigen::Index>(std::floor(sy));
      const Eigen::Index ix = static_cast<Eigen::Index>(std::floor(sx));
      double acc = 0.0;
      for (int ky = -1; ky <= 2; ++ky)
        for (int kx = -1; kx <= 2; ++kx) {
          const double wgt = cubic(sy - (iy + ky)) * cubic(sx - (ix + kx));
          const Eigen::Index yy = std::clamp<Eigen::Index>(iy + ky, 0, h - 1);
          const Eigen::Index xx = std::clamp<Eigen::Index>(ix + kx, 0, w - 1);
          acc += wgt * src(yy, xx);
        }
      out(oy, ox) = acc;
    }
  return out;
}

// Double-loop MSE.
inline double mse(const spadsr::Image& a, const spadsr::Image& b) {
  double acc = 0.0;
  for (Eigen::Index y = 0; y < a.rows(); ++y)
    for (Eigen::Index x = 0; x < a.cols(); ++x) {
      const double d = a(y, x) - b(y, x);
      acc += d * d;
    }
  return acc / static_cast<double>(a.size());
}

// Two-pass global SSIM with population moments, c1 = 1e-4, c2 = 9e-4.
inline double ssim(const spadsr::Image& a, const spadsr::Image& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    ma += a.data()[i];
    mb += b.data()[i];
  }
  ma /= n;
  mb /= n;
  double va = 0, vb = 0, cov = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double da = a.data()[i] - ma, db = b.data()[i] - mb;
    va += da * da;
    vb += db * db;
    cov += da * db;
  }
  va /= n;
  vb /= n;
  cov /= n;
  const double c1 = 1e-4, c2 = 9e-4;
  return (2 * mb * ma + c1) * (2 * cov + c2) /
         ((mb * mb + ma * ma + c1) * (vb + va + c2));
}

// Analytic ray-sphere hit for ray s*(u,v,1) against a sphere at (cx,cy,cz);
// returns the z-depth (= s for this parameterization) or a negative value
// on miss.
inline double ray_sphere_depth(double u, double v, double cx, double cy,
                               double cz, double radius) {
  const double a = u * u + v * v + 1.0;
  const double b = -2.0 * (u * cx + v * cy + cz);
  const double c = cx * cx + cy * cy + cz * cz - radius * radius;
  const double disc = b * b - 4 * a * c;
  if (disc < 0) return -1.0;
  const double s = (-b - std::sqrt(disc)) / (2 * a);
  return s > 0 ? s : -1.0;
}

}  // namespace oracle
