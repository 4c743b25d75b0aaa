#include "pf/matching.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "pf/csv.hpp"

namespace pf {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Rows hold gamma(r) for the source set and gamma(r') for the target set;
// the voting offset of a pair is source - target.
std::vector<LocationVector> locations(const ProposalSet& R) {
  std::vector<LocationVector> g;
  g.reserve(R.size());
  for (const auto& p : R.items) g.push_back(location_vector(p.box));
  return g;
}

void check_sets(const ProposalSet& R, const ProposalSet& Rp,
                const Matrix& A) {
  if (A.rows != static_cast<int>(R.size()) ||
      A.cols != static_cast<int>(Rp.size()))
    throw std::invalid_argument("appearance matrix does not match the proposal sets");
  if (R.size() == 0 || Rp.size() == 0)
    throw std::invalid_argument("matching requires nonempty proposal sets");
}

Assignment assemble(const char* strategy, const ProposalSet& R,
                    const Matrix& A, const Matrix& G) {
  Assignment asg;
  asg.strategy = strategy;
  asg.matches.resize(R.size());
  for (int i = 0; i < static_cast<int>(R.size()); ++i) {
    int best = 0;
    double best_post = -1.0;
    for (int j = 0; j < A.cols; ++j) {
      double post = A.at(i, j) * G.at(i, j);
      if (post > best_post) {
        best_post = post;
        best = j;
      }
    }
    asg.matches[i] = {i, best, A.at(i, best) * G.at(i, best), A.at(i, best),
                      G.at(i, best)};
  }
  return asg;
}

struct AxisGrid {
  double min = 0, width = 1;
  int bins = 0;
};

AxisGrid axis_grid(double lo, double hi, int bins) {
  if (bins < 3) throw std::invalid_argument("hough axis needs at least 3 bins");
  double span = hi - lo;
  double width = std::max(span / (bins - 2), 1e-6);
  return {lo - width, width, bins};
}

// Index range of bins whose centers lie within `radius` of v; falls back
// to the nearest bin so every vote lands somewhere.
std::pair<int, int> bin_range(const AxisGrid& g, double v, double radius) {
  // clamp before the int cast: a grid-covering radius must not overflow
  double lo = std::ceil((v - radius - g.min) / g.width - 0.5);
  double hi = std::floor((v + radius - g.min) / g.width - 0.5);
  int b0 = static_cast<int>(std::clamp(lo, 0.0, static_cast<double>(g.bins)));
  int b1 = static_cast<int>(std::clamp(hi, -1.0, static_cast<double>(g.bins - 1)));
  if (b0 > b1) {
    int nearest = static_cast<int>(std::floor((v - g.min) / g.width));
    nearest = std::clamp(nearest, 0, g.bins - 1);
    return {nearest, nearest};
  }
  return {b0, b1};
}

}  // namespace

double gauss_kernel(const Offset& d, const KernelBandwidths& bw) {
  double q = d.dx * d.dx / (bw.sigma_xy * bw.sigma_xy) +
             d.dy * d.dy / (bw.sigma_xy * bw.sigma_xy) +
             d.dsc * d.dsc / (bw.sigma_s * bw.sigma_s);
  return std::exp(-0.5 * q);
}

double HoughHistogram::total_mass() const {
  double m = 0;
  for (double v : h) m += v;
  return m;
}

Matrix appearance_matrix(const DescriptorSet& F, const DescriptorSet& G) {
  if (F.kind != G.kind || F.dim != G.dim)
    throw std::invalid_argument("appearance_matrix: descriptor kind/dimension mismatch");
  Matrix A(static_cast<int>(F.count()), static_cast<int>(G.count()));
  if (F.kind == DescriptorKind::histogram) {
    for (int i = 0; i < A.rows; ++i)
      for (int j = 0; j < A.cols; ++j)
        A.at(i, j) = appearance_prob(F.row(i), G.row(j), F.dim, F.kind);
    return A;
  }
  Eigen::Map<const RowMat> mf(F.data.data(), A.rows, F.dim);
  Eigen::Map<const RowMat> mg(G.data.data(), A.cols, G.dim);
  Eigen::Map<RowMat> ma(A.data.data(), A.rows, A.cols);
  ma.noalias() = mf * mg.transpose();
  for (double& v : A.data) v = std::clamp((1.0 + v) / 2.0, 0.0, 1.0);
  return A;
}

Assignment nam(const ProposalSet& R, const ProposalSet& Rp, const Matrix& A) {
  check_sets(R, Rp, A);
  Matrix G(A.rows, A.cols);
  std::fill(G.data.begin(), G.data.end(), 1.0);
  return assemble("nam", R, A, G);
}

HoughHistogram hough_histogram(const ProposalSet& R, const ProposalSet& Rp,
                               const Matrix& A, const HoughBins& bins) {
  check_sets(R, Rp, A);
  auto gs = locations(R);
  auto gt = locations(Rp);

  // Offsets are differences gamma(s) - gamma(s'), so the per-axis extrema
  // come from the extrema of the two sets.
  auto minmax = [](const std::vector<LocationVector>& g, auto field) {
    double lo = field(g[0]), hi = lo;
    for (const auto& v : g) {
      lo = std::min(lo, field(v));
      hi = std::max(hi, field(v));
    }
    return std::pair{lo, hi};
  };
  auto [sx_lo, sx_hi] = minmax(gs, [](const LocationVector& v) { return v.cx; });
  auto [sy_lo, sy_hi] = minmax(gs, [](const LocationVector& v) { return v.cy; });
  auto [ss_lo, ss_hi] = minmax(gs, [](const LocationVector& v) { return v.sc; });
  auto [tx_lo, tx_hi] = minmax(gt, [](const LocationVector& v) { return v.cx; });
  auto [ty_lo, ty_hi] = minmax(gt, [](const LocationVector& v) { return v.cy; });
  auto [ts_lo, ts_hi] = minmax(gt, [](const LocationVector& v) { return v.sc; });

  AxisGrid gx = axis_grid(sx_lo - tx_hi, sx_hi - tx_lo, bins.bx);
  AxisGrid gy = axis_grid(sy_lo - ty_hi, sy_hi - ty_lo, bins.by);
  AxisGrid gsc = axis_grid(ss_lo - ts_hi, ss_hi - ts_lo, bins.bs);

  HoughHistogram hist;
  hist.bx = gx.bins;
  hist.by = gy.bins;
  hist.bs = gsc.bins;
  hist.x_min = gx.min;
  hist.y_min = gy.min;
  hist.s_min = gsc.min;
  hist.x_width = gx.width;
  hist.y_width = gy.width;
  hist.s_width = gsc.width;
  hist.h.assign(static_cast<size_t>(gx.bins) * gy.bins * gsc.bins, 0.0);

  // Truncated-Gaussian splat with sigma = one bin width per axis (so the
  // smearing vanishes as the grid refines).  The kept bin set is a product
  // of per-axis ranges, so renormalization factorizes per axis.
  std::vector<double> wx(gx.bins), wy(gy.bins), ws(gsc.bins);
  for (size_t i = 0; i < gs.size(); ++i)
    for (size_t j = 0; j < gt.size(); ++j) {
      double a = A.at(static_cast<int>(i), static_cast<int>(j));
      if (a == 0) continue;
      double ox = gs[i].cx - gt[j].cx;
      double oy = gs[i].cy - gt[j].cy;
      double os = gs[i].sc - gt[j].sc;
      auto [x0, x1] = bin_range(gx, ox, bins.splat_radius * gx.width);
      auto [y0, y1] = bin_range(gy, oy, bins.splat_radius * gy.width);
      auto [s0, s1] = bin_range(gsc, os, bins.splat_radius * gsc.width);
      auto axis_weights = [](std::vector<double>& w, const AxisGrid& g,
                             double v, double sigma, int b0, int b1) {
        double sum = 0;
        for (int b = b0; b <= b1; ++b) {
          double d = g.min + (b + 0.5) * g.width - v;
          w[b] = std::exp(-0.5 * d * d / (sigma * sigma));
          sum += w[b];
        }
        for (int b = b0; b <= b1; ++b) w[b] /= sum;
      };
      axis_weights(wx, gx, ox, gx.width, x0, x1);
      axis_weights(wy, gy, oy, gy.width, y0, y1);
      axis_weights(ws, gsc, os, gsc.width, s0, s1);
      for (int bx = x0; bx <= x1; ++bx)
        for (int by = y0; by <= y1; ++by) {
          double wxy = a * wx[bx] * wy[by];
          double* cell =
              hist.h.data() + (static_cast<size_t>(bx) * gy.bins + by) * gsc.bins;
          for (int bs = s0; bs <= s1; ++bs) cell[bs] += wxy * ws[bs];
        }
    }
  return hist;
}

namespace {

Matrix phm_geometric(const ProposalSet& R, const ProposalSet& Rp,
                     const Matrix& A, const KernelBandwidths& bw, PhmMode mode,
                     const HoughBins& bins) {
  auto gs = locations(R);
  auto gt = locations(Rp);
  int n = A.rows, np = A.cols;
  Matrix G(n, np);

  if (mode == PhmMode::exact) {
    long long pairs = static_cast<long long>(n) * np;
    if (pairs > kPhmExactPairLimit)
      throw std::invalid_argument(
          "phm exact mode supports at most " +
          std::to_string(kPhmExactPairLimit) +
          " proposal pairs (" + std::to_string(pairs) +
          " requested); use binned mode");
    // X = the multiset of all pairwise offsets; each carries vote mass A.
    std::vector<Offset> X;
    std::vector<double> ax;
    X.reserve(pairs);
    ax.reserve(pairs);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < np; ++j) {
        X.push_back({gs[i].cx - gt[j].cx, gs[i].cy - gt[j].cy,
                     gs[i].sc - gt[j].sc});
        ax.push_back(A.at(i, j));
      }
    size_t m = X.size();
    for (size_t ij = 0; ij < m; ++ij) {
      double acc = 0;
      for (size_t x = 0; x < m; ++x)
        acc += ax[x] * gauss_kernel({X[ij].dx - X[x].dx, X[ij].dy - X[x].dy,
                                     X[ij].dsc - X[x].dsc},
                                    bw);
      G.data[ij] = acc;
    }
    return G;
  }

  HoughHistogram hist = hough_histogram(R, Rp, A, bins);
  // g_ij = sum over bin centers of K(o_ij - c_b) h_b, contracted one axis
  // at a time so the inner loops are exp-free.
  std::vector<double> kx(hist.bx), ky(hist.by), ks(hist.bs);
  std::vector<double> t1(static_cast<size_t>(hist.bx) * hist.by);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < np; ++j) {
      double ox = gs[i].cx - gt[j].cx;
      double oy = gs[i].cy - gt[j].cy;
      double os = gs[i].sc - gt[j].sc;
      for (int b = 0; b < hist.bx; ++b) {
        double d = hist.center_x(b) - ox;
        kx[b] = std::exp(-0.5 * d * d / (bw.sigma_xy * bw.sigma_xy));
      }
      for (int b = 0; b < hist.by; ++b) {
        double d = hist.center_y(b) - oy;
        ky[b] = std::exp(-0.5 * d * d / (bw.sigma_xy * bw.sigma_xy));
      }
      for (int b = 0; b < hist.bs; ++b) {
        double d = hist.center_s(b) - os;
        ks[b] = std::exp(-0.5 * d * d / (bw.sigma_s * bw.sigma_s));
      }
      for (int bx = 0; bx < hist.bx; ++bx)
        for (int by = 0; by < hist.by; ++by) {
          const double* cell =
              hist.h.data() +
              (static_cast<size_t>(bx) * hist.by + by) * hist.bs;
          double acc = 0;
          for (int bs = 0; bs < hist.bs; ++bs) acc += cell[bs] * ks[bs];
          t1[static_cast<size_t>(bx) * hist.by + by] = acc;
        }
      double g = 0;
      for (int bx = 0; bx < hist.bx; ++bx) {
        double acc = 0;
        const double* row = t1.data() + static_cast<size_t>(bx) * hist.by;
        for (int by = 0; by < hist.by; ++by) acc += row[by] * ky[by];
        g += kx[bx] * acc;
      }
      G.at(i, j) = g;
    }
  return G;
}

}  // namespace

Assignment phm(const ProposalSet& R, const ProposalSet& Rp, const Matrix& A,
               const KernelBandwidths& bw, PhmMode mode,
               const HoughBins& bins) {
  check_sets(R, Rp, A);
  return assemble("phm", R, A, phm_geometric(R, Rp, A, bw, mode, bins));
}

Matrix phm_posterior(const ProposalSet& R, const ProposalSet& Rp,
                     const Matrix& A, const KernelBandwidths& bw, PhmMode mode,
                     const HoughBins& bins) {
  check_sets(R, Rp, A);
  Matrix P = phm_geometric(R, Rp, A, bw, mode, bins);
  for (size_t k = 0; k < P.data.size(); ++k) P.data[k] *= A.data[k];
  return P;
}

std::vector<int> neighborhood(const ProposalSet& R, int i) {
  if (i < 0 || i >= static_cast<int>(R.size()))
    throw std::out_of_range("neighborhood: bad proposal id");
  std::vector<int> ids;
  for (int j = 0; j < static_cast<int>(R.size()); ++j)
    if (intersection_area(R[i].box, R[j].box) > 0) ids.push_back(j);
  return ids;
}

LocalOffsetField local_offsets(const ProposalSet& R, const ProposalSet& Rp,
                               const Matrix& A) {
  check_sets(R, Rp, A);
  auto gs = locations(R);
  auto gt = locations(Rp);
  int n = A.rows;

  // phi_app: best match by appearance alone.
  std::vector<int> phi(n);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double best_a = A.at(i, 0);
    for (int j = 1; j < A.cols; ++j)
      if (A.at(i, j) > best_a) {
        best_a = A.at(i, j);
        best = j;
      }
    phi[i] = best;
  }
  std::vector<Offset> match_offset(n);
  for (int i = 0; i < n; ++i)
    match_offset[i] = {gs[i].cx - gt[phi[i]].cx, gs[i].cy - gt[phi[i]].cy,
                       gs[i].sc - gt[phi[i]].sc};

  LocalOffsetField field;
  field.x_star.resize(n);
  field.neighbor_count.resize(n);
  std::vector<Offset> pts;
  for (int i = 0; i < n; ++i) {
    pts.clear();
    for (int j : neighborhood(R, i)) pts.push_back(match_offset[j]);
    field.neighbor_count[i] = static_cast<int>(pts.size());
    field.x_star[i] = geometric_median(pts);
  }
  return field;
}

Assignment lom(const ProposalSet& R, const ProposalSet& Rp, const Matrix& A,
               const KernelBandwidths& bw) {
  check_sets(R, Rp, A);
  auto gs = locations(R);
  auto gt = locations(Rp);
  int n = A.rows, np = A.cols;

  LocalOffsetField field = local_offsets(R, Rp, A);

  // Per-source confidence: sum of the neighbors' appearance-match scores.
  std::vector<int> phi(n);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double best_a = A.at(i, 0);
    for (int j = 1; j < np; ++j)
      if (A.at(i, j) > best_a) {
        best_a = A.at(i, j);
        best = j;
      }
    phi[i] = best;
  }
  std::vector<double> conf(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0;
    for (int j : neighborhood(R, i)) s += A.at(j, phi[j]);
    conf[i] = s;
  }

  Matrix G(n, np);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < np; ++j) {
      Offset d{gs[i].cx - gt[j].cx - field.x_star[i].dx,
               gs[i].cy - gt[j].cy - field.x_star[i].dy,
               gs[i].sc - gt[j].sc - field.x_star[i].dsc};
      G.at(i, j) = gauss_kernel(d, bw) * conf[i];
    }
  return assemble("lom", R, A, G);
}

void export_matches(const Assignment& asg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "src_id,tgt_id,posterior,appearance,geometric\n";
  for (const auto& m : asg.matches)
    out << m.src_id << "," << m.tgt_id << "," << format_double(m.posterior)
        << "," << format_double(m.appearance) << ","
        << format_double(m.geometric) << "\n";
  if (!out) throw std::runtime_error(path + ": write failed");
}

Assignment import_matches(const std::string& path) {
  auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "src_id,tgt_id,posterior,appearance,geometric")
    throw std::runtime_error(path + ": bad match file header");
  Assignment asg;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::string where = path + " line " + std::to_string(i + 1);
    auto f = split_csv_line(lines[i]);
    if (f.size() != 5)
      throw std::runtime_error(where + ": expected 5 fields");
    MatchRecord m;
    m.src_id = static_cast<int>(parse_int(f[0], where));
    m.tgt_id = static_cast<int>(parse_int(f[1], where));
    m.posterior = parse_double(f[2], where);
    m.appearance = parse_double(f[3], where);
    m.geometric = parse_double(f[4], where);
    if (m.src_id != static_cast<int>(asg.matches.size()))
      throw std::runtime_error(where + ": src_id out of order");
    asg.matches.push_back(m);
  }
  return asg;
}

}  // namespace pf
