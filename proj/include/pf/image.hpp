#pragma once

#include <string>
#include <vector>

namespace pf {

// Intensity image, values in [0, 1], row-major with interleaved channels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 (luma) or 3 (RGB)
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * h * c, fill) {}

  double at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  double& at(int x, int y, int c = 0) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }

  double luma(int x, int y) const {
    if (channels == 1) return at(x, y);
    return 0.299 * at(x, y, 0) + 0.587 * at(x, y, 1) + 0.114 * at(x, y, 2);
  }

  // Single-channel copy (identity for luma images).
  Image to_luma() const;
};

// Binary PGM (P5) / PPM (P6), maxval up to 255; values normalized to [0, 1].
// Throws with path and reason on unreadable or undecodable files.
Image load_image(const std::string& path);

// Writes P5 for 1-channel, P6 for 3-channel images, maxval 255.
void save_image(const Image& img, const std::string& path);

// Bilinear interpolation with clamp-to-border; exact at integer coordinates.
double sample_bilinear(const Image& img, double x, double y, int c = 0);

}  // namespace pf
