#pragma once

#include <span>
#include <vector>

namespace pf {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Axis-aligned rectangular support in image coordinates (origin top-left,
// x right, y down). Requires x_min < x_max and y_min < y_max.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool valid() const { return x_min < x_max && y_min < y_max; }
  Point center() const { return {(x_min + x_max) / 2, (y_min + y_max) / 2}; }
};

// 3-D embedding of a box: center position plus log2 of sqrt(area), so that
// scale offsets are additive and symmetric between shrink and grow.
struct LocationVector {
  double cx = 0.0;
  double cy = 0.0;
  double sc = 0.0;
};

// Difference of two location vectors; element of the voting space.
struct Offset {
  double dx = 0.0;
  double dy = 0.0;
  double dsc = 0.0;
};

double intersection_area(const Box& a, const Box& b);
double iou(const Box& a, const Box& b);

// |b ∩ r| / |r|: how much of r lies inside b.
double containment_ratio(const Box& b, const Box& r);

LocationVector location_vector(const Box& b);

// a - b componentwise.
Offset offset_between(const LocationVector& a, const LocationVector& b);

// Point minimizing the sum of Euclidean distances to `pts`, by Weiszfeld
// iteration started at the coordinate-wise median. Iterates landing on a
// data point are tested for optimality via the subgradient condition and
// perturbed away when not optimal. Deterministic.
Offset geometric_median(std::span<const Offset> pts, double tol = 1e-8,
                        int max_iter = 200);

// Sum of distances from x to pts.
double median_objective(const Offset& x, std::span<const Offset> pts);

// Thin-plate-spline map fitted on control-point pairs. Per output coordinate
// the map is affine + sum of kernel terms U(r) = r^2 log r^2; kernel weights
// satisfy the side conditions (orthogonal to [1, x, y] of the controls).
struct TpsMap {
  std::vector<Point> controls;     // source keypoints
  std::vector<double> wx, wy;      // kernel weights per output coordinate
  double ax[3] = {0, 0, 0};        // x' = ax[0] + ax[1]*x + ax[2]*y + ...
  double ay[3] = {0, 0, 0};
  double lambda = 0.0;
};

// Fits src -> dst. lambda = 0 interpolates exactly; lambda > 0 smooths.
// Throws on m < 3, mismatched sizes, duplicated or collinear control points,
// naming the offending points.
TpsMap tps_fit(std::span<const Point> src, std::span<const Point> dst,
               double lambda = 0.0);

Point tps_apply(const TpsMap& map, const Point& p);

// Axis-aligned bounding box of the four warped vertices of b. Throws if the
// warped box degenerates to zero area.
Box warp_box_tight(const TpsMap& map, const Box& b);

}  // namespace pf
