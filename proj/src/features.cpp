#include "pf/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "pf/csv.hpp"

namespace pf {

const char* kind_name(DescriptorKind kind) {
  switch (kind) {
    case DescriptorKind::hog: return "hog";
    case DescriptorKind::dense: return "dense";
    case DescriptorKind::histogram: return "histogram";
  }
  return "?";
}

DescriptorKind kind_from_name(const std::string& name) {
  if (name == "hog") return DescriptorKind::hog;
  if (name == "dense" || name == "imported-dense") return DescriptorKind::dense;
  if (name == "histogram" || name == "imported-histogram")
    return DescriptorKind::histogram;
  throw std::invalid_argument("unknown descriptor kind '" + name + "'");
}

std::vector<double> extract_patch(const Image& img, const Box& b, int side) {
  if (!b.valid()) throw std::invalid_argument("extract_patch: empty box");
  Image luma = img.to_luma();
  std::vector<double> patch(static_cast<size_t>(side) * side);
  double sx = b.width() / side, sy = b.height() / side;
  for (int py = 0; py < side; ++py)
    for (int px = 0; px < side; ++px) {
      double x = b.x_min + (px + 0.5) * sx - 0.5;
      double y = b.y_min + (py + 0.5) * sy - 0.5;
      patch[static_cast<size_t>(py) * side + px] = sample_bilinear(luma, x, y);
    }
  return patch;
}

namespace {

constexpr int kCellSide = 8;
constexpr int kInsOrients = 9;                 // contrast-insensitive bins
constexpr int kSenOrients = 2 * kInsOrients;   // contrast-sensitive bins
constexpr double kClip = 0.2;
constexpr double kTextureWeight = 0.2357;

void normalize_l2(double* v, int dim) {
  double n2 = 0;
  for (int i = 0; i < dim; ++i) n2 += v[i] * v[i];
  if (n2 == 0) return;  // flat-patch exemption
  double inv = 1.0 / std::sqrt(n2);
  for (int i = 0; i < dim; ++i) v[i] *= inv;
}

void normalize_l1(double* v, int dim, const std::string& where) {
  double s = 0;
  for (int i = 0; i < dim; ++i) {
    if (v[i] < 0)
      throw std::invalid_argument(where + ": histogram descriptors must be nonnegative");
    s += v[i];
  }
  if (s == 0) return;
  for (int i = 0; i < dim; ++i) v[i] /= s;
}

}  // namespace

std::vector<double> hog_descriptor(const std::vector<double>& patch,
                                   int side) {
  if (patch.size() != static_cast<size_t>(side) * side)
    throw std::invalid_argument("hog_descriptor: patch size mismatch");
  if (side % kCellSide != 0)
    throw std::invalid_argument("hog_descriptor: side must be a multiple of the cell size");
  const int cells = side / kCellSide;
  const int nb = cells * cells;
  const double two_pi = 2.0 * std::numbers::pi;
  auto px = [&](int x, int y) {
    return patch[static_cast<size_t>(y) * side + x];
  };

  // Contrast-sensitive histograms: trilinear splat of gradient magnitude
  // over (cell_x, cell_y, orientation), magnitude scaled by 1/cell_area.
  std::vector<double> sen(static_cast<size_t>(kSenOrients) * nb, 0.0);
  const double mag_norm = 1.0 / (kCellSide * kCellSide);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      double gx = (x == 0)          ? px(1, y) - px(0, y)
                  : (x == side - 1) ? px(side - 1, y) - px(side - 2, y)
                                    : 0.5 * (px(x + 1, y) - px(x - 1, y));
      double gy = (y == 0)          ? px(x, 1) - px(x, 0)
                  : (y == side - 1) ? px(x, side - 1) - px(x, side - 2)
                                    : 0.5 * (px(x, y + 1) - px(x, y - 1));
      double m = std::sqrt(gx * gx + gy * gy) * mag_norm;
      if (m == 0) continue;
      double theta = std::atan2(gy, gx);
      if (theta < 0) theta += two_pi;
      if (theta >= two_pi) theta = 0;
      double o = theta * kSenOrients / two_pi;
      int o0 = std::min(static_cast<int>(o), kSenOrients - 1);
      double od = o - o0;
      int o1 = (o0 + 1) % kSenOrients;

      double xb = (x + 0.5) / kCellSide - 0.5;
      double yb = (y + 0.5) / kCellSide - 0.5;
      int xb0 = static_cast<int>(std::floor(xb));
      int yb0 = static_cast<int>(std::floor(yb));
      double xd = xb - xb0, yd = yb - yb0;
      const int cxs[2] = {xb0, xb0 + 1};
      const int cys[2] = {yb0, yb0 + 1};
      const double wxs[2] = {1 - xd, xd};
      const double wys[2] = {1 - yd, yd};
      for (int a = 0; a < 2; ++a) {
        if (cxs[a] < 0 || cxs[a] >= cells) continue;
        for (int b = 0; b < 2; ++b) {
          if (cys[b] < 0 || cys[b] >= cells) continue;
          size_t cell = static_cast<size_t>(cys[b]) * cells + cxs[a];
          double w = wxs[a] * wys[b] * m;
          sen[static_cast<size_t>(o0) * nb + cell] += w * (1 - od);
          sen[static_cast<size_t>(o1) * nb + cell] += w * od;
        }
      }
    }

  // Boundary cells receive 7/8 of the interior splat weight; compensate.
  for (int o = 0; o < kSenOrients; ++o) {
    double* ch = sen.data() + static_cast<size_t>(o) * nb;
    for (int x = 0; x < cells; ++x) ch[x] *= 8.0 / 7.0;
    for (int x = 0; x < cells; ++x) ch[(cells - 1) * cells + x] *= 8.0 / 7.0;
    for (int y = 0; y < cells; ++y) ch[y * cells] *= 8.0 / 7.0;
    for (int y = 0; y < cells; ++y) ch[y * cells + cells - 1] *= 8.0 / 7.0;
  }

  std::vector<double> ins(static_cast<size_t>(kInsOrients) * nb, 0.0);
  for (int o = 0; o < kInsOrients; ++o)
    for (int c = 0; c < nb; ++c)
      ins[static_cast<size_t>(o) * nb + c] =
          sen[static_cast<size_t>(o) * nb + c] +
          sen[static_cast<size_t>(o + kInsOrients) * nb + c];

  // Inverse norms of 2x2 cell blocks from insensitive energy, border
  // blocks replicated so every cell sees four norms.
  const int bpad = cells + 1;
  const double eps =
      1e-4 / 4 / (kCellSide * kCellSide * kCellSide * kCellSide);
  std::vector<double> energy(nb, 0.0);
  for (int o = 0; o < kInsOrients; ++o)
    for (int c = 0; c < nb; ++c) {
      double v = ins[static_cast<size_t>(o) * nb + c];
      energy[c] += v * v;
    }
  std::vector<double> norms(static_cast<size_t>(bpad) * bpad);
  auto block_norm = [&](int bx, int by) {
    bx = std::clamp(bx, 0, cells - 2);
    by = std::clamp(by, 0, cells - 2);
    return 1.0 / std::sqrt(energy[by * cells + bx] +
                           energy[by * cells + bx + 1] +
                           energy[(by + 1) * cells + bx] +
                           energy[(by + 1) * cells + bx + 1] + eps);
  };
  for (int by = -1; by < cells; ++by)
    for (int bx = -1; bx < cells; ++bx)
      norms[static_cast<size_t>(by + 1) * bpad + bx + 1] = block_norm(bx, by);

  // Channel-major output: 18 sensitive + 9 insensitive + 4 texture.
  std::vector<double> out(static_cast<size_t>(kSenOrients + kInsOrients + 4) *
                              nb,
                          0.0);
  auto norm_at = [&](int cx, int cy, int k) {
    // k indexes the four blocks containing cell (cx, cy)
    int bx = cx - 1 + k % 2, by = cy - 1 + k / 2;
    return norms[static_cast<size_t>(by + 1) * bpad + bx + 1];
  };
  for (int cy = 0; cy < cells; ++cy)
    for (int cx = 0; cx < cells; ++cx) {
      size_t cell = static_cast<size_t>(cy) * cells + cx;
      for (int k = 0; k < 4; ++k) {
        double n = norm_at(cx, cy, k);
        double texture = 0;
        for (int o = 0; o < kSenOrients; ++o) {
          double t = std::min(sen[static_cast<size_t>(o) * nb + cell] * n, kClip);
          out[static_cast<size_t>(o) * nb + cell] += 0.5 * t;
          texture += t;
        }
        for (int o = 0; o < kInsOrients; ++o) {
          double t = std::min(ins[static_cast<size_t>(o) * nb + cell] * n, kClip);
          out[static_cast<size_t>(kSenOrients + o) * nb + cell] += 0.5 * t;
        }
        out[static_cast<size_t>(kSenOrients + kInsOrients + k) * nb + cell] =
            kTextureWeight * texture;
      }
    }

  normalize_l2(out.data(), static_cast<int>(out.size()));
  return out;
}

DescriptorSet describe(const Image& img, const ProposalSet& proposals,
                       int side) {
  DescriptorSet set;
  set.kind = DescriptorKind::hog;
  const int cells = side / kCellSide;
  set.dim = cells * cells * (kSenOrients + kInsOrients + 4);
  set.data.resize(static_cast<size_t>(set.dim) * proposals.size());
  for (size_t i = 0; i < proposals.size(); ++i) {
    auto d = hog_descriptor(extract_patch(img, proposals[i].box, side), side);
    std::copy(d.begin(), d.end(), set.row(i));
  }
  return set;
}

void whiten(std::vector<DescriptorSet*> sets) {
  if (sets.empty()) return;
  int dim = sets[0]->dim;
  for (auto* s : sets) {
    if (s->kind == DescriptorKind::histogram)
      throw std::invalid_argument("whiten: histogram descriptors are not whitened");
    if (s->dim != dim)
      throw std::invalid_argument("whiten: descriptor dimension mismatch");
  }
  size_t total = 0;
  for (auto* s : sets) total += s->count();
  if (total == 0) return;

  std::vector<double> mean(dim, 0.0), var(dim, 0.0);
  for (auto* s : sets)
    for (size_t i = 0; i < s->count(); ++i) {
      const double* r = s->row(i);
      for (int d = 0; d < dim; ++d) mean[d] += r[d];
    }
  for (int d = 0; d < dim; ++d) mean[d] /= static_cast<double>(total);
  for (auto* s : sets)
    for (size_t i = 0; i < s->count(); ++i) {
      const double* r = s->row(i);
      for (int d = 0; d < dim; ++d) {
        double c = r[d] - mean[d];
        var[d] += c * c;
      }
    }
  std::vector<double> inv_std(dim);
  for (int d = 0; d < dim; ++d)
    inv_std[d] = 1.0 / (std::sqrt(var[d] / static_cast<double>(total)) + 1e-8);

  for (auto* s : sets)
    for (size_t i = 0; i < s->count(); ++i) {
      double* r = s->row(i);
      for (int d = 0; d < dim; ++d) r[d] = (r[d] - mean[d]) * inv_std[d];
      normalize_l2(r, dim);
    }
}

double appearance_prob(const double* f, const double* g, int dim,
                       DescriptorKind kind) {
  if (kind == DescriptorKind::histogram) {
    double chi2 = 0;
    for (int i = 0; i < dim; ++i) {
      double d = f[i] - g[i];
      chi2 += d * d / (f[i] + g[i] + 1e-12);
    }
    return std::clamp(1.0 - 0.5 * chi2, 0.0, 1.0);
  }
  double dot = 0;
  for (int i = 0; i < dim; ++i) dot += f[i] * g[i];
  return std::clamp((1.0 + dot) / 2.0, 0.0, 1.0);
}

double appearance_prob(const DescriptorSet& a, size_t i,
                       const DescriptorSet& b, size_t j) {
  if (a.kind != b.kind || a.dim != b.dim)
    throw std::invalid_argument("appearance_prob: descriptor kind/dimension mismatch");
  return appearance_prob(a.row(i), b.row(j), a.dim, a.kind);
}

DescriptorSet import_descriptors(const std::string& path) {
  auto lines = read_lines(path);
  if (lines.empty()) throw std::runtime_error(path + ": empty descriptor file");
  auto header = split_csv_line(lines[0]);
  if (header.size() != 3)
    throw std::runtime_error(path + ": expected header kind,dim,count");
  DescriptorSet set;
  set.kind = kind_from_name(header[0]);
  set.dim = static_cast<int>(parse_int(header[1], path + " header"));
  long long count = parse_int(header[2], path + " header");
  if (set.dim < 1 || count < 0)
    throw std::runtime_error(path + ": bad descriptor header values");
  if (lines.size() < static_cast<size_t>(count) + 1)
    throw std::runtime_error(path + ": expected " + std::to_string(count) +
                             " descriptor rows");
  set.data.resize(static_cast<size_t>(set.dim) * count);
  for (long long i = 0; i < count; ++i) {
    std::string where = path + " line " + std::to_string(i + 2);
    auto fields = split_csv_line(lines[i + 1]);
    if (fields.size() != static_cast<size_t>(set.dim))
      throw std::runtime_error(where + ": expected " +
                               std::to_string(set.dim) + " values");
    double* r = set.row(i);
    for (int d = 0; d < set.dim; ++d) r[d] = parse_double(fields[d], where);
    if (set.kind == DescriptorKind::histogram)
      normalize_l1(r, set.dim, where);
    else
      normalize_l2(r, set.dim);
  }
  return set;
}

void export_descriptors(const DescriptorSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << kind_name(set.kind) << "," << set.dim << "," << set.count() << "\n";
  for (size_t i = 0; i < set.count(); ++i) {
    const double* r = set.row(i);
    for (int d = 0; d < set.dim; ++d)
      out << (d ? "," : "") << format_double(r[d]);
    out << "\n";
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace pf
