#include "pf/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "pf/csv.hpp"
#include "pf/rng.hpp"

namespace pf {

namespace {

constexpr double kMinSide = 16.0;
constexpr double kMinArea = 16.0;
constexpr double kGridEps = 1e-6;

void renumber(ProposalSet& set) {
  for (size_t i = 0; i < set.items.size(); ++i)
    set.items[i].id = static_cast<int>(i);
}

void subsample_even(ProposalSet& set, int limit) {
  size_t n = set.items.size();
  if (n <= static_cast<size_t>(limit)) return;
  std::vector<Proposal> kept;
  kept.reserve(limit);
  for (size_t i = 0; i < static_cast<size_t>(limit); ++i)
    kept.push_back(set.items[i * n / limit]);
  set.items = std::move(kept);
}

Box clip_box(const Box& b, int width, int height) {
  return {std::clamp(b.x_min, 0.0, static_cast<double>(width)),
          std::clamp(b.y_min, 0.0, static_cast<double>(height)),
          std::clamp(b.x_max, 0.0, static_cast<double>(width)),
          std::clamp(b.y_max, 0.0, static_cast<double>(height))};
}

Box sampled_box(Rng& rng, double cx, double cy, int width, int height) {
  double side_lo = std::log(kMinSide);
  double side_hi = std::log(static_cast<double>(std::min(width, height)));
  double side = std::exp(rng.uniform(side_lo, side_hi));
  double aspect = std::exp(rng.uniform(-std::log(2.0), std::log(2.0)));
  double w = side * std::sqrt(aspect);
  double h = side / std::sqrt(aspect);
  Box b{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
  return clip_box(b, width, height);
}

}  // namespace

ProposalSet sliding_window(int width, int height, int limit) {
  if (limit < 1) throw std::invalid_argument("sliding_window: limit must be >= 1");
  double smin = std::min(width, height);
  if (smin < kMinSide)
    throw std::invalid_argument("sliding_window: image smaller than the 16 px minimum window");
  const double aspects[5] = {0.5, 1.0 / std::sqrt(2.0), 1.0, std::sqrt(2.0), 2.0};

  ProposalSet set{width, height, {}};
  for (double s = kMinSide; s <= smin + kGridEps; s *= std::sqrt(2.0)) {
    for (double a : aspects) {
      double w = s * std::sqrt(a);
      double h = s / std::sqrt(a);
      if (w > width + kGridEps || h > height + kGridEps) continue;
      double sx = w / 4, sy = h / 4;
      // clip away the ~1e-14 drift the repeated sqrt(2)/stride sums leave
      for (double y = 0; y + h <= height + kGridEps; y += sy)
        for (double x = 0; x + w <= width + kGridEps; x += sx)
          set.items.push_back(
              {clip_box({x, y, x + w, y + h}, width, height), 0.0, 0});
    }
  }
  subsample_even(set, limit);
  renumber(set);
  return set;
}

ProposalSet uniform_sample(int width, int height, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("uniform_sample: n must be >= 1");
  if (std::min(width, height) < kMinSide)
    throw std::invalid_argument("uniform_sample: image smaller than the 16 px minimum window");
  Rng rng(seed);
  ProposalSet set{width, height, {}};
  set.items.reserve(n);
  for (int i = 0; i < n; ++i) {
    double cx = rng.uniform(0.0, width);
    double cy = rng.uniform(0.0, height);
    set.items.push_back({sampled_box(rng, cx, cy, width, height), 0.0, i});
  }
  return set;
}

ProposalSet gaussian_sample(int width, int height, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gaussian_sample: n must be >= 1");
  if (std::min(width, height) < kMinSide)
    throw std::invalid_argument("gaussian_sample: image smaller than the 16 px minimum window");
  Rng rng(seed);
  ProposalSet set{width, height, {}};
  set.items.reserve(n);
  double mx = width / 2.0, my = height / 2.0;
  double sx = width / 4.0, sy = height / 4.0;
  for (int i = 0; i < n; ++i) {
    double cx, cy;
    do {
      cx = mx + sx * rng.normal();
      cy = my + sy * rng.normal();
    } while (cx < 0 || cx > width || cy < 0 || cy > height);
    set.items.push_back({sampled_box(rng, cx, cy, width, height), 0.0, i});
  }
  return set;
}

ImportResult import_proposals(const std::string& path, int width, int height,
                              int limit,
                              std::optional<std::uint64_t> shuffle_seed) {
  if (limit < 1) throw std::invalid_argument("import_proposals: limit must be >= 1");
  auto lines = read_lines(path);
  if (lines.empty()) throw std::runtime_error(path + ": empty proposal file");
  auto header = split_csv_line(lines[0]);
  bool has_score;
  if (header.size() == 4)
    has_score = false;
  else if (header.size() == 5)
    has_score = true;
  else
    throw std::runtime_error(path + ": expected header x_min,y_min,x_max,y_max[,score]");
  const char* expect[4] = {"x_min", "y_min", "x_max", "y_max"};
  for (int i = 0; i < 4; ++i)
    if (header[i] != expect[i])
      throw std::runtime_error(path + ": bad header column '" + header[i] + "'");
  if (has_score && header[4] != "score")
    throw std::runtime_error(path + ": bad header column '" + header[4] + "'");

  ImportResult res;
  res.set.width = width;
  res.set.height = height;
  for (size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    std::string where = path + " line " + std::to_string(li + 1);
    auto fields = split_csv_line(lines[li]);
    if (fields.size() != header.size())
      throw std::runtime_error(where + ": expected " +
                               std::to_string(header.size()) + " fields");
    Box b{parse_double(fields[0], where), parse_double(fields[1], where),
          parse_double(fields[2], where), parse_double(fields[3], where)};
    if (b.x_max < b.x_min || b.y_max < b.y_min)
      throw std::runtime_error(where + ": inverted box");
    double score = has_score ? parse_double(fields[4], where) : 0.0;
    Box clipped = clip_box(b, width, height);
    if (clipped.area() < kMinArea) {
      ++res.rejected;
      continue;
    }
    res.set.items.push_back({clipped, score, 0});
  }

  auto& items = res.set.items;
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    rng.shuffle(items);
    if (items.size() > static_cast<size_t>(limit)) items.resize(limit);
  } else if (has_score) {
    std::stable_sort(items.begin(), items.end(),
                     [](const Proposal& a, const Proposal& b) {
                       return a.score > b.score;
                     });
    if (items.size() > static_cast<size_t>(limit)) items.resize(limit);
  } else if (items.size() > static_cast<size_t>(limit)) {
    items.resize(limit);
  }
  renumber(res.set);
  return res;
}

void export_proposals(const ProposalSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "x_min,y_min,x_max,y_max,score\n";
  for (const auto& p : set.items)
    out << format_double(p.box.x_min) << "," << format_double(p.box.y_min)
        << "," << format_double(p.box.x_max) << ","
        << format_double(p.box.y_max) << "," << format_double(p.score)
        << "\n";
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace pf
