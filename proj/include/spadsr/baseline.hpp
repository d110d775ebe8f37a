#pragma once

#include <cmath>
#include <vector>

#include "spadsr/errors.hpp"
#include "spadsr/image.hpp"

namespace spadsr {

/// Catmull-Rom cubic convolution kernel (a = -0.5). Interpolating: weight 1
/// at t = 0 and 0 at every other integer offset; partitions unity.
template <class Scalar>
Scalar cubic_kernel(Scalar t) {
  const Scalar a = Scalar(-0.5);
  const Scalar x = std::abs(t);
  if (x <= Scalar(1)) return ((a + 2) * x - (a + 3)) * x * x + 1;
  if (x < Scalar(2)) return (((x - 5) * x + 8) * x - 4) * a;
  return Scalar(0);
}

/// Separable bicubic x`r` upscale with half-pixel-centered mapping
/// (src = (dst + 0.5)/r - 0.5) and edge clamp. Not range-clamped; callers
/// working on normalized depth apply clamp01 themselves if needed.
template <class Scalar>
ImageT<Scalar> bicubic_upscale(const ImageT<Scalar>& src, int r) {
  require(r >= 1, "upscale factor must be >= 1");
  require(src.rows() > 0 && src.cols() > 0, "empty input frame");
  const Eigen::Index h = src.rows(), w = src.cols();
  const Eigen::Index oh = h * r, ow = w * r;

  // Horizontal pass: h x ow intermediate.
  ImageT<Scalar> mid(h, ow);
  std::vector<Scalar> wx(4);
  for (Eigen::Index ox = 0; ox < ow; ++ox) {
    const Scalar sx = (Scalar(ox) + Scalar(0.5)) / Scalar(r) - Scalar(0.5);
    const Eigen::Index ix = static_cast<Eigen::Index>(std::floor(sx));
    const Scalar fx = sx - Scalar(ix);
    for (int k = 0; k < 4; ++k) wx[k] = cubic_kernel(fx - Scalar(k - 1));
    Eigen::Index cols[4];
    for (int k = 0; k < 4; ++k)
      cols[k] = std::clamp<Eigen::Index>(ix + k - 1, 0, w - 1);
    for (Eigen::Index y = 0; y < h; ++y) {
      Scalar acc = 0;
      for (int k = 0; k < 4; ++k) acc += wx[k] * src(y, cols[k]);
      mid(y, ox) = acc;
    }
  }

  // Vertical pass.
  ImageT<Scalar> out(oh, ow);
  for (Eigen::Index oy = 0; oy < oh; ++oy) {
    const Scalar sy = (Scalar(oy) + Scalar(0.5)) / Scalar(r) - Scalar(0.5);
    const Eigen::Index iy = static_cast<Eigen::Index>(std::floor(sy));
    const Scalar fy = sy - Scalar(iy);
    Scalar wy[4];
    for (int k = 0; k < 4; ++k) wy[k] = cubic_kernel(fy - Scalar(k - 1));
    Eigen::Index rows[4];
    for (int k = 0; k < 4; ++k)
      rows[k] = std::clamp<Eigen::Index>(iy + k - 1, 0, h - 1);
    for (Eigen::Index ox = 0; ox < ow; ++ox) {
      Scalar acc = 0;
      for (int k = 0; k < 4; ++k) acc += wy[k] * mid(rows[k], ox);
      out(oy, ox) = acc;
    }
  }
  return out;
}

/// Bicubic upscale of normalized depth, clamped back to [0,1].
Image bicubic_upscale_clamped(const Image& src, int r);

/// Frame-by-frame bicubic upscale of a normalized sequence (clamped).
std::vector<Image> bicubic_sequence(const std::vector<Image>& frames, int r);

}  // namespace spadsr
