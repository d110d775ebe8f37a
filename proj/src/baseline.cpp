#include "spadsr/baseline.hpp"

namespace spadsr {

template double cubic_kernel<double>(double);
template float cubic_kernel<float>(float);
template ImageT<double> bicubic_upscale<double>(const ImageT<double>&, int);
template ImageT<float> bicubic_upscale<float>(const ImageT<float>&, int);

Image bicubic_upscale_clamped(const Image& src, int r) {
  return bicubic_upscale(src, r).max(0.0).min(1.0);
}

std::vector<Image> bicubic_sequence(const std::vector<Image>& frames, int r) {
  std::vector<Image> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(bicubic_upscale_clamped(f, r));
  return out;
}

}  // namespace spadsr
