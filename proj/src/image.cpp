#include "pf/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace pf {

Image Image::to_luma() const {
  if (channels == 1) return *this;
  Image out(width, height, 1);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) out.at(x, y) = luma(x, y);
  return out;
}

namespace {

// Reads the next whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) continue;
    tok.push_back(static_cast<char>(c));
    while ((c = in.get()) != EOF && !std::isspace(c) && c != '#')
      tok.push_back(static_cast<char>(c));
    if (c == '#')
      while ((c = in.get()) != EOF && c != '\n') {
      }
    break;
  }
  return tok;
}

int parse_header_int(std::istream& in, const std::string& path,
                     const char* what) {
  std::string tok = next_token(in);
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
    throw std::runtime_error(path + ": bad PNM header (" + std::string(what) +
                             ")");
  return std::stoi(tok);
}

}  // namespace

Image load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open image file");
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (!in || m0 != 'P' || (m1 != '5' && m1 != '6'))
    throw std::runtime_error(path + ": unsupported image format (want binary PGM/PPM)");
  int channels = (m1 == '6') ? 3 : 1;
  int w = parse_header_int(in, path, "width");
  int h = parse_header_int(in, path, "height");
  int maxval = parse_header_int(in, path, "maxval");
  if (w <= 0 || h <= 0)
    throw std::runtime_error(path + ": bad image dimensions");
  if (maxval <= 0 || maxval > 255)
    throw std::runtime_error(path + ": unsupported maxval " +
                             std::to_string(maxval));
  // header ends with a single whitespace byte, already consumed by the
  // token reader stopping at it

  size_t n = static_cast<size_t>(w) * h * channels;
  std::vector<unsigned char> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n)
    throw std::runtime_error(path + ": truncated image data");

  Image img(w, h, channels);
  double inv = 1.0 / maxval;
  for (size_t i = 0; i < n; ++i) img.data[i] = raw[i] * inv;
  return img;
}

void save_image(const Image& img, const std::string& path) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument(path + ": image must have 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << (img.channels == 3 ? "P6" : "P5") << "\n"
      << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) {
    double v = std::clamp(img.data[i], 0.0, 1.0);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

double sample_bilinear(const Image& img, double x, double y, int c) {
  double cx = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  double cy = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  int x0 = static_cast<int>(std::floor(cx));
  int y0 = static_cast<int>(std::floor(cy));
  int x1 = std::min(x0 + 1, img.width - 1);
  int y1 = std::min(y0 + 1, img.height - 1);
  double fx = cx - x0, fy = cy - y0;
  double v00 = img.at(x0, y0, c), v10 = img.at(x1, y0, c);
  double v01 = img.at(x0, y1, c), v11 = img.at(x1, y1, c);
  return (1 - fy) * ((1 - fx) * v00 + fx * v10) +
         fy * ((1 - fx) * v01 + fx * v11);
}

}  // namespace pf
