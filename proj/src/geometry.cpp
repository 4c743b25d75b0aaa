#include "pf/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pf {

double intersection_area(const Box& a, const Box& b) {
  double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const Box& a, const Box& b) {
  double inter = intersection_area(a, b);
  double uni = a.area() + b.area() - inter;
  return inter / uni;
}

double containment_ratio(const Box& b, const Box& r) {
  return intersection_area(b, r) / r.area();
}

LocationVector location_vector(const Box& b) {
  Point c = b.center();
  return {c.x, c.y, std::log2(std::sqrt(b.area()))};
}

Offset offset_between(const LocationVector& a, const LocationVector& b) {
  return {a.cx - b.cx, a.cy - b.cy, a.sc - b.sc};
}

double median_objective(const Offset& x, std::span<const Offset> pts) {
  double sum = 0.0;
  for (const Offset& p : pts) {
    double dx = x.dx - p.dx, dy = x.dy - p.dy, ds = x.dsc - p.dsc;
    sum += std::sqrt(dx * dx + dy * dy + ds * ds);
  }
  return sum;
}

namespace {

double axis_median(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Offset geometric_median(std::span<const Offset> pts, double tol,
                        int max_iter) {
  if (pts.empty()) throw std::invalid_argument("geometric_median: empty set");
  if (!(tol > 0.0)) throw std::invalid_argument("geometric_median: tol <= 0");
  if (pts.size() == 1) return pts[0];

  std::vector<double> ax(pts.size()), ay(pts.size()), as(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    ax[i] = pts[i].dx;
    ay[i] = pts[i].dy;
    as[i] = pts[i].dsc;
  }
  Offset x{axis_median(ax), axis_median(ay), axis_median(as)};

  // Both the iterate and the optimum stay inside the bounding box of the
  // points, so ‖g‖ * diag bounds the objective gap (subgradient certificate).
  auto span = [](const std::vector<double>& v) {
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
  };
  double diag = std::sqrt(span(ax) * span(ax) + span(ay) * span(ay) +
                          span(as) * span(as));

  constexpr double kOnPoint = 1e-12;
  for (int iter = 0; iter < max_iter; ++iter) {
    // Split points into those coinciding with the iterate and the rest.
    double gx = 0, gy = 0, gs = 0;        // subgradient of the far points
    double nx = 0, ny = 0, ns = 0, wsum = 0;  // Weiszfeld update terms
    int at_x = 0;
    for (const Offset& p : pts) {
      double dx = x.dx - p.dx, dy = x.dy - p.dy, ds = x.dsc - p.dsc;
      double d = std::sqrt(dx * dx + dy * dy + ds * ds);
      if (d < kOnPoint) {
        ++at_x;
        continue;
      }
      gx += dx / d;
      gy += dy / d;
      gs += ds / d;
      double w = 1.0 / d;
      nx += p.dx * w;
      ny += p.dy * w;
      ns += p.dsc * w;
      wsum += w;
    }
    double gnorm = std::sqrt(gx * gx + gy * gy + gs * gs);
    if (at_x > 0) {
      // Iterate sits on a data point: optimal iff the pull of the remaining
      // points does not exceed the multiplicity there.
      if (gnorm <= static_cast<double>(at_x) + 1e-15) return x;
      double step = 1e-6 / gnorm;
      x = {x.dx - gx * step, x.dy - gy * step, x.dsc - gs * step};
      continue;
    }
    if (gnorm * diag <= tol) return x;
    Offset next{nx / wsum, ny / wsum, ns / wsum};
    if (next.dx == x.dx && next.dy == x.dy && next.dsc == x.dsc) break;
    x = next;
  }
  return x;
}

namespace {

double tps_kernel(double r2) {
  // U(r) = r^2 log r^2, continuous at r = 0.
  return r2 > 0.0 ? r2 * std::log(r2) : 0.0;
}

void validate_controls(std::span<const Point> src) {
  const size_t m = src.size();
  for (size_t i = 0; i < m; ++i)
    for (size_t j = i + 1; j < m; ++j) {
      double dx = src[i].x - src[j].x, dy = src[i].y - src[j].y;
      if (dx * dx + dy * dy < 1e-18)
        throw std::runtime_error(
            "tps_fit: duplicate control points " + std::to_string(i) +
            " and " + std::to_string(j));
    }
  // Collinearity: the largest triangle spanned by any point against the
  // widest pair must have nonzero area.
  size_t a = 0, b = 1;
  double best = -1.0;
  for (size_t i = 0; i < m; ++i)
    for (size_t j = i + 1; j < m; ++j) {
      double dx = src[i].x - src[j].x, dy = src[i].y - src[j].y;
      double d2 = dx * dx + dy * dy;
      if (d2 > best) {
        best = d2;
        a = i;
        b = j;
      }
    }
  double span = std::sqrt(best);
  double max_area = 0.0;
  size_t worst = 0;
  for (size_t i = 0; i < m; ++i) {
    if (i == a || i == b) continue;
    double cross = (src[b].x - src[a].x) * (src[i].y - src[a].y) -
                   (src[b].y - src[a].y) * (src[i].x - src[a].x);
    if (std::abs(cross) > max_area) {
      max_area = std::abs(cross);
      worst = i;
    }
  }
  (void)worst;
  if (max_area <= 1e-9 * span * span)
    throw std::runtime_error(
        "tps_fit: control points are collinear (pivot pair " +
        std::to_string(a) + "," + std::to_string(b) + ")");
}

}  // namespace

TpsMap tps_fit(std::span<const Point> src, std::span<const Point> dst,
               double lambda) {
  if (src.size() != dst.size())
    throw std::invalid_argument("tps_fit: control point count mismatch");
  if (src.size() < 3)
    throw std::invalid_argument("tps_fit: need at least 3 control points");
  if (lambda < 0.0) throw std::invalid_argument("tps_fit: lambda < 0");
  validate_controls(src);

  const int m = static_cast<int>(src.size());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m + 3, m + 3);
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      double dx = src[i].x - src[j].x, dy = src[i].y - src[j].y;
      double k = tps_kernel(dx * dx + dy * dy);
      L(i, j) = k;
      L(j, i) = k;
    }
    L(i, i) = lambda;
    L(i, m) = L(m, i) = 1.0;
    L(i, m + 1) = L(m + 1, i) = src[i].x;
    L(i, m + 2) = L(m + 2, i) = src[i].y;
  }

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m + 3, 2);
  for (int i = 0; i < m; ++i) {
    rhs(i, 0) = dst[i].x;
    rhs(i, 1) = dst[i].y;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(L);
  if (qr.rank() < m + 3)
    throw std::runtime_error(
        "tps_fit: singular system (degenerate control points)");
  Eigen::MatrixXd sol = qr.solve(rhs);

  TpsMap map;
  map.lambda = lambda;
  map.controls.assign(src.begin(), src.end());
  map.wx.resize(m);
  map.wy.resize(m);
  for (int i = 0; i < m; ++i) {
    map.wx[i] = sol(i, 0);
    map.wy[i] = sol(i, 1);
  }
  for (int k = 0; k < 3; ++k) {
    map.ax[k] = sol(m + k, 0);
    map.ay[k] = sol(m + k, 1);
  }
  return map;
}

Point tps_apply(const TpsMap& map, const Point& p) {
  double x = map.ax[0] + map.ax[1] * p.x + map.ax[2] * p.y;
  double y = map.ay[0] + map.ay[1] * p.x + map.ay[2] * p.y;
  for (size_t i = 0; i < map.controls.size(); ++i) {
    double dx = p.x - map.controls[i].x, dy = p.y - map.controls[i].y;
    double k = tps_kernel(dx * dx + dy * dy);
    x += map.wx[i] * k;
    y += map.wy[i] * k;
  }
  return {x, y};
}

Box warp_box_tight(const TpsMap& map, const Box& b) {
  if (!b.valid()) throw std::invalid_argument("warp_box_tight: invalid box");
  Point corners[4] = {{b.x_min, b.y_min},
                      {b.x_max, b.y_min},
                      {b.x_max, b.y_max},
                      {b.x_min, b.y_max}};
  double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0;
  for (int i = 0; i < 4; ++i) {
    Point q = tps_apply(map, corners[i]);
    if (i == 0) {
      x_lo = x_hi = q.x;
      y_lo = y_hi = q.y;
    } else {
      x_lo = std::min(x_lo, q.x);
      x_hi = std::max(x_hi, q.x);
      y_lo = std::min(y_lo, q.y);
      y_hi = std::max(y_hi, q.y);
    }
  }
  Box out{x_lo, y_lo, x_hi, y_hi};
  if (!out.valid())
    throw std::runtime_error("warp_box_tight: warped box has zero area");
  return out;
}

}  // namespace pf
