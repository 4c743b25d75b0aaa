#include "pf/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "pf/csv.hpp"

namespace pf {

namespace {

double trapezoid_auc(const std::vector<double>& xs,
                     const std::vector<double>& ys) {
  double area = 0;
  for (size_t i = 1; i < xs.size(); ++i)
    area += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
  double span = xs.back() - xs.front();
  return span > 0 ? area / span : 0.0;
}

void check_tau_grid(const std::vector<double>& taus) {
  if (taus.size() < 2)
    throw std::invalid_argument("tau grid needs at least two samples");
  for (size_t i = 0; i < taus.size(); ++i) {
    if (taus[i] < 0 || taus[i] > 1)
      throw std::invalid_argument("tau grid values must lie in [0,1]");
    if (i && taus[i] <= taus[i - 1])
      throw std::invalid_argument("tau grid must be ascending");
  }
}

void check_annotations(const AnnotatedImage& a, const char* side) {
  if (a.keypoints.size() < 3)
    throw std::invalid_argument(std::string(side) +
                                ": at least 3 keypoints required");
  std::set<int> ids;
  for (const auto& k : a.keypoints) {
    if (!ids.insert(k.id).second)
      throw std::invalid_argument(std::string(side) + ": duplicate keypoint id " +
                                  std::to_string(k.id));
    if (k.x < 0 || k.x > a.width - 1 || k.y < 0 || k.y > a.height - 1)
      throw std::invalid_argument(std::string(side) + ": keypoint " +
                                  std::to_string(k.id) + " outside the image");
  }
}

// PCR-style curve from per-member IoU values: fraction with 1 - IoU < tau.
MetricCurve iou_threshold_curve(const std::vector<double>& ious,
                                const std::vector<double>& taus) {
  MetricCurve c;
  c.abscissa = taus;
  c.values.resize(taus.size());
  for (size_t t = 0; t < taus.size(); ++t) {
    int ok = 0;
    for (double v : ious)
      if (1.0 - v < taus[t]) ++ok;
    c.values[t] = ious.empty() ? 0.0 : double(ok) / double(ious.size());
  }
  c.auc = trapezoid_auc(c.abscissa, c.values);
  return c;
}

float sample_plane(const std::vector<float>& plane, int w, int h, double x,
                   double y) {
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  x0 = std::clamp(x0, 0, w - 1);
  y0 = std::clamp(y0, 0, h - 1);
  int x1 = std::min(x0 + 1, w - 1);
  int y1 = std::min(y0 + 1, h - 1);
  double fx = std::clamp(x - x0, 0.0, 1.0);
  double fy = std::clamp(y - y0, 0.0, 1.0);
  double v00 = plane[static_cast<size_t>(y0) * w + x0];
  double v10 = plane[static_cast<size_t>(y0) * w + x1];
  double v01 = plane[static_cast<size_t>(y1) * w + x0];
  double v11 = plane[static_cast<size_t>(y1) * w + x1];
  return static_cast<float>((1 - fy) * ((1 - fx) * v00 + fx * v10) +
                            fy * ((1 - fx) * v01 + fx * v11));
}

}  // namespace

std::vector<int> select_rs(const ProposalSet& R, const Box& b) {
  std::vector<int> ids;
  for (int i = 0; i < static_cast<int>(R.size()); ++i)
    if (containment_ratio(b, R[i].box) >= kRsContainment) ids.push_back(i);
  if (ids.empty())
    throw std::runtime_error(
        "no proposal lies 75% inside the object bounding box");
  return ids;
}

GroundTruth ground_truth(const ProposalSet& R, const AnnotatedImage& src,
                         const AnnotatedImage& dst) {
  check_annotations(src, "source annotations");
  check_annotations(dst, "target annotations");
  auto sorted = [](std::vector<Keypoint> kps) {
    std::sort(kps.begin(), kps.end(),
              [](const Keypoint& a, const Keypoint& b) { return a.id < b.id; });
    return kps;
  };
  auto skps = sorted(src.keypoints);
  auto dkps = sorted(dst.keypoints);
  if (skps.size() != dkps.size())
    throw std::invalid_argument("keypoint id sets differ between the two images");
  std::vector<Point> sp, dp;
  for (size_t i = 0; i < skps.size(); ++i) {
    if (skps[i].id != dkps[i].id)
      throw std::invalid_argument("keypoint id sets differ between the two images");
    sp.push_back({skps[i].x, skps[i].y});
    dp.push_back({dkps[i].x, dkps[i].y});
  }

  GroundTruth gt;
  gt.tps = tps_fit(sp, dp, 0.0);
  gt.members = select_rs(R, src.box);
  gt.boxes.reserve(gt.members.size());
  for (int id : gt.members)
    gt.boxes.push_back(warp_box_tight(gt.tps, R[id].box));
  return gt;
}

std::vector<double> default_tau_grid() {
  std::vector<double> taus(101);
  for (int i = 0; i <= 100; ++i) taus[i] = i / 100.0;
  return taus;
}

MetricCurve pcr_curve(const Assignment& asg, const ProposalSet& Rp,
                      const GroundTruth& gt, const std::vector<double>& taus) {
  check_tau_grid(taus);
  std::vector<double> ious;
  ious.reserve(gt.members.size());
  for (size_t m = 0; m < gt.members.size(); ++m) {
    const Box& matched = Rp[asg.matches[gt.members[m]].tgt_id].box;
    ious.push_back(iou(matched, gt.boxes[m]));
  }
  return iou_threshold_curve(ious, taus);
}

MetricCurve miou_at_k(const Assignment& asg, const ProposalSet& Rp,
                      const GroundTruth& gt) {
  size_t n = gt.members.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    double pa = asg.matches[gt.members[a]].posterior;
    double pb = asg.matches[gt.members[b]].posterior;
    if (pa != pb) return pa > pb;
    return gt.members[a] < gt.members[b];
  });
  MetricCurve c;
  c.abscissa.resize(n);
  c.values.resize(n);
  double acc = 0;
  for (size_t k = 0; k < n; ++k) {
    size_t m = order[k];
    const Box& matched = Rp[asg.matches[gt.members[m]].tgt_id].box;
    acc += iou(matched, gt.boxes[m]);
    c.abscissa[k] = static_cast<double>(k + 1);
    c.values[k] = acc / static_cast<double>(k + 1);
  }
  c.auc = n ? std::accumulate(c.values.begin(), c.values.end(), 0.0) /
                  static_cast<double>(n)
            : 0.0;
  return c;
}

MetricCurve upper_bound_curve(const ProposalSet& Rp, const GroundTruth& gt,
                              const std::vector<double>& taus) {
  check_tau_grid(taus);
  std::vector<double> ious;
  ious.reserve(gt.members.size());
  for (const Box& star : gt.boxes) {
    double best = 0;
    for (const auto& p : Rp.items) best = std::max(best, iou(p.box, star));
    ious.push_back(best);
  }
  return iou_threshold_curve(ious, taus);
}

double pck(const FlowField& flow, const std::vector<Keypoint>& src_kps,
           const std::vector<Keypoint>& dst_kps, const Box& dst_box,
           double alpha) {
  if (alpha <= 0 || alpha > 1)
    throw std::invalid_argument("pck: alpha must lie in (0,1]");
  if (src_kps.empty()) throw std::invalid_argument("pck: no keypoints");
  double thresh = alpha * std::max(dst_box.width(), dst_box.height());
  int correct = 0;
  for (const auto& k : src_kps) {
    auto it = std::find_if(dst_kps.begin(), dst_kps.end(),
                           [&](const Keypoint& d) { return d.id == k.id; });
    if (it == dst_kps.end())
      throw std::invalid_argument("pck: keypoint id " + std::to_string(k.id) +
                                  " missing on the target side");
    if (k.x < 0 || k.x > flow.width - 1 || k.y < 0 || k.y > flow.height - 1)
      continue;  // outside the flow grid counts as incorrect
    double px = k.x + sample_plane(flow.u, flow.width, flow.height, k.x, k.y);
    double py = k.y + sample_plane(flow.v, flow.width, flow.height, k.x, k.y);
    double dx = px - it->x, dy = py - it->y;
    if (std::sqrt(dx * dx + dy * dy) <= thresh) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(src_kps.size());
}

FlowField tps_flow(const TpsMap& tps, int width, int height) {
  FlowField flow(width, height);
  std::fill(flow.valid.begin(), flow.valid.end(), 1);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      Point p = tps_apply(tps, {double(x), double(y)});
      size_t i = flow.idx(x, y);
      flow.u[i] = static_cast<float>(p.x - x);
      flow.v[i] = static_cast<float>(p.y - y);
    }
  return flow;
}

std::vector<Keypoint> read_keypoints(const std::string& path) {
  auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "id,x,y")
    throw std::runtime_error(path + ": expected keypoint header id,x,y");
  std::vector<Keypoint> kps;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::string where = path + " line " + std::to_string(i + 1);
    auto f = split_csv_line(lines[i]);
    if (f.size() != 3) throw std::runtime_error(where + ": expected 3 fields");
    kps.push_back({static_cast<int>(parse_int(f[0], where)),
                   parse_double(f[1], where), parse_double(f[2], where)});
  }
  return kps;
}

void write_keypoints(const std::vector<Keypoint>& kps,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "id,x,y\n";
  for (const auto& k : kps)
    out << k.id << "," << format_double(k.x) << "," << format_double(k.y)
        << "\n";
  if (!out) throw std::runtime_error(path + ": write failed");
}

Box read_bbox(const std::string& path) {
  auto lines = read_lines(path);
  if (lines.empty())
    throw std::runtime_error(path + ": empty bounding-box file");
  auto f = split_csv_line(lines[0]);
  if (f.size() != 4)
    throw std::runtime_error(path + ": expected x_min,y_min,x_max,y_max");
  Box b{parse_double(f[0], path), parse_double(f[1], path),
        parse_double(f[2], path), parse_double(f[3], path)};
  if (!b.valid())
    throw std::runtime_error(path + ": degenerate bounding box");
  return b;
}

void write_bbox(const Box& b, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << format_double(b.x_min) << "," << format_double(b.y_min) << ","
      << format_double(b.x_max) << "," << format_double(b.y_max) << "\n";
  if (!out) throw std::runtime_error(path + ": write failed");
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  auto lines = read_lines(path);
  const std::string header =
      "pair_id,src_image,dst_image,src_kp,dst_kp,src_bb,dst_bb";
  if (lines.empty() || lines[0] != header)
    throw std::runtime_error(path + ": expected manifest header " + header);
  std::vector<ManifestEntry> entries;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::string where = path + " line " + std::to_string(i + 1);
    auto f = split_csv_line(lines[i]);
    if (f.size() != 7) throw std::runtime_error(where + ": expected 7 fields");
    entries.push_back({f[0], f[1], f[2], f[3], f[4], f[5], f[6]});
  }
  if (entries.empty()) throw std::runtime_error(path + ": no pairs listed");
  return entries;
}

namespace {

MetricRecord aggregate_record(const std::vector<MetricRecord>& records) {
  MetricRecord agg;
  agg.pair_id = "aggregate";
  agg.strategy = records.empty() ? "" : records[0].strategy;
  for (const auto& r : records) {
    agg.pcr_auc += r.pcr_auc;
    agg.miou_auc += r.miou_auc;
    agg.pck += r.pck;
    agg.rs_count += r.rs_count;
  }
  if (!records.empty()) {
    double n = static_cast<double>(records.size());
    agg.pcr_auc /= n;
    agg.miou_auc /= n;
    agg.pck /= n;
  }
  return agg;
}

}  // namespace

void write_metrics_csv(const std::vector<MetricRecord>& records, double alpha,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "pair_id,strategy,pcr_auc,miou_auc,pck@" << format_double(alpha)
      << ",rs_count\n";
  auto row = [&](const MetricRecord& r) {
    out << r.pair_id << "," << r.strategy << "," << format_double(r.pcr_auc)
        << "," << format_double(r.miou_auc) << "," << format_double(r.pck)
        << "," << r.rs_count << "\n";
  };
  for (const auto& r : records) row(r);
  row(aggregate_record(records));
  if (!out) throw std::runtime_error(path + ": write failed");
}

void write_metrics_json(const std::vector<MetricRecord>& records, double alpha,
                        const std::string& path) {
  nlohmann::ordered_json doc;
  doc["alpha"] = alpha;
  doc["pairs"] = nlohmann::ordered_json::array();
  auto to_json = [](const MetricRecord& r) {
    nlohmann::ordered_json j;
    j["pair_id"] = r.pair_id;
    j["strategy"] = r.strategy;
    j["pcr_auc"] = r.pcr_auc;
    j["miou_auc"] = r.miou_auc;
    j["pck"] = r.pck;
    j["rs_count"] = r.rs_count;
    return j;
  };
  for (const auto& r : records) doc["pairs"].push_back(to_json(r));
  doc["aggregate"] = to_json(aggregate_record(records));
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw std::runtime_error(path + ": write failed");
}

void write_curve_csv(const MetricCurve& curve,
                     const std::string& abscissa_name,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << abscissa_name << ",value\n";
  for (size_t i = 0; i < curve.abscissa.size(); ++i)
    out << format_double(curve.abscissa[i]) << ","
        << format_double(curve.values[i]) << "\n";
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace pf
