#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pf/image.hpp"

namespace pf {

// Per-pixel displacement field (source -> target), row-major planes.
// u, v, score are float32 so .flo round-trips are bit-exact.
// Invalid pixels carry u = v = 0 and score = 0 until filled.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> u, v;
  std::vector<std::uint8_t> valid;
  std::vector<float> score;

  FlowField() = default;
  FlowField(int w, int h)
      : width(w),
        height(h),
        u(static_cast<size_t>(w) * h, 0.f),
        v(static_cast<size_t>(w) * h, 0.f),
        valid(static_cast<size_t>(w) * h, 0),
        score(static_cast<size_t>(w) * h, 0.f) {}

  size_t idx(int x, int y) const {
    return static_cast<size_t>(y) * width + x;
  }
  bool all_valid() const;
};

// Middlebury .flo: float32 magic 202021.25, int32 width, int32 height,
// then row-major interleaved float32 (u, v); little-endian.  Validity and
// score planes go to a `<path>.meta` CSV sidecar, omitted when every pixel
// is valid with zero score.
void write_flo(const FlowField& flow, const std::string& path);
FlowField read_flo(const std::string& path);

enum class HoleMode { black, nearest };

// out(p) = sample_bilinear(target, p + (u(p), v(p))) on valid pixels;
// invalid pixels are black or copied from the nearest valid pixel.
Image warp_backward(const Image& target, const FlowField& flow,
                    HoleMode holes = HoleMode::black);

}  // namespace pf
