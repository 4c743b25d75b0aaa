#pragma once

#include <string>
#include <vector>

#include "pf/flow_io.hpp"
#include "pf/geometry.hpp"
#include "pf/matching.hpp"
#include "pf/proposals.hpp"

namespace pf {

struct Keypoint {
  int id = 0;
  double x = 0, y = 0;
};

struct AnnotatedImage {
  int width = 0, height = 0;
  Box box;  // object bounding box
  std::vector<Keypoint> keypoints;
};

// Ground-truth-eligible subset and its warped boxes.
struct GroundTruth {
  std::vector<int> members;  // ids into the source proposal set
  std::vector<Box> boxes;    // r* per member
  TpsMap tps;
};

struct MetricCurve {
  std::vector<double> abscissa;
  std::vector<double> values;
  double auc = 0;
};

inline constexpr double kRsContainment = 0.75;

// Proposals lying at least 75% inside the object box; error when empty.
std::vector<int> select_rs(const ProposalSet& R, const Box& b);

// Keypoint TPS (lambda = 0) from src to dst; r* = tight box of the four
// warped corners for every eligible proposal.
GroundTruth ground_truth(const ProposalSet& R, const AnnotatedImage& src,
                         const AnnotatedImage& dst);

// 101 uniform samples on [0,1].
std::vector<double> default_tau_grid();

// PCR(tau) = fraction of members with 1 - IoU(match box, r*) < tau;
// AuC by trapezoid over the grid span.
MetricCurve pcr_curve(const Assignment& asg, const ProposalSet& Rp,
                      const GroundTruth& gt, const std::vector<double>& taus);

// Members ranked by posterior descending (ties -> lowest id); value at k =
// mean IoU of the top k; AuC = mean over all k.
MetricCurve miou_at_k(const Assignment& asg, const ProposalSet& Rp,
                      const GroundTruth& gt);

// PCR-style curve of the best achievable IoU per member.
MetricCurve upper_bound_curve(const ProposalSet& Rp, const GroundTruth& gt,
                              const std::vector<double>& taus);

// Fraction of keypoints transferred by the flow to within
// alpha * max(h, w) of their annotated destination (inclusive).
double pck(const FlowField& flow, const std::vector<Keypoint>& src_kps,
           const std::vector<Keypoint>& dst_kps, const Box& dst_box,
           double alpha);

// Dense flow of a fitted TPS map (used for ground-truth flow checks).
FlowField tps_flow(const TpsMap& tps, int width, int height);

// Annotation files.
std::vector<Keypoint> read_keypoints(const std::string& path);
void write_keypoints(const std::vector<Keypoint>& kps,
                     const std::string& path);
Box read_bbox(const std::string& path);
void write_bbox(const Box& b, const std::string& path);

struct ManifestEntry {
  std::string pair_id;
  std::string src_image, dst_image;
  std::string src_kp, dst_kp;
  std::string src_bb, dst_bb;
};

std::vector<ManifestEntry> read_manifest(const std::string& path);

struct MetricRecord {
  std::string pair_id;
  std::string strategy;
  double pcr_auc = 0;
  double miou_auc = 0;
  double pck = 0;
  int rs_count = 0;
};

// One row per pair plus an `aggregate` row (mean metrics, summed count).
void write_metrics_csv(const std::vector<MetricRecord>& records,
                       double alpha, const std::string& path);
void write_metrics_json(const std::vector<MetricRecord>& records,
                        double alpha, const std::string& path);
void write_curve_csv(const MetricCurve& curve, const std::string& abscissa_name,
                     const std::string& path);

}  // namespace pf
