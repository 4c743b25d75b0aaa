#include "pf/flowfield.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace pf {

namespace {

struct PixelSpan {
  int x0, x1, y0, y1;  // inclusive; empty when x0 > x1 or y0 > y1
};

// Integer pixels inside a closed real-valued box, clamped to the image.
PixelSpan covered_pixels(const Box& b, int width, int height) {
  PixelSpan s;
  s.x0 = std::max(0, static_cast<int>(std::ceil(b.x_min)));
  s.y0 = std::max(0, static_cast<int>(std::ceil(b.y_min)));
  s.x1 = std::min(width - 1, static_cast<int>(std::floor(b.x_max)));
  s.y1 = std::min(height - 1, static_cast<int>(std::floor(b.y_max)));
  return s;
}

void fill_nearest(FlowField& flow) {
  std::vector<std::uint8_t> filled(flow.valid.begin(), flow.valid.end());
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < flow.height; ++y)
    for (int x = 0; x < flow.width; ++x)
      if (filled[flow.idx(x, y)]) queue.emplace_back(x, y);
  if (queue.empty()) return;
  const int dx[4] = {1, -1, 0, 0};
  const int dy[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    auto [x, y] = queue.front();
    queue.pop_front();
    size_t i = flow.idx(x, y);
    for (int k = 0; k < 4; ++k) {
      int nx = x + dx[k], ny = y + dy[k];
      if (nx < 0 || ny < 0 || nx >= flow.width || ny >= flow.height) continue;
      size_t ni = flow.idx(nx, ny);
      if (filled[ni]) continue;
      flow.u[ni] = flow.u[i];
      flow.v[ni] = flow.v[i];
      filled[ni] = 1;
      queue.emplace_back(nx, ny);
    }
  }
}

void fill_joint_bilateral(FlowField& flow, const Image& guide) {
  constexpr int kRadius = 15;
  constexpr double kSigmaSpatial = 7.0;
  constexpr double kSigmaGuide = 0.1;
  bool any_valid = false;
  for (auto f : flow.valid)
    if (f) {
      any_valid = true;
      break;
    }
  if (!any_valid) return;

  Image luma = guide.to_luma();
  std::vector<size_t> holes;
  for (size_t i = 0; i < flow.valid.size(); ++i)
    if (!flow.valid[i]) holes.push_back(i);

  std::vector<float> nu(holes.size()), nv(holes.size());
  std::vector<std::uint8_t> done(holes.size(), 0);
  size_t remaining = holes.size();
  for (int radius = kRadius; remaining > 0; radius *= 2) {
    for (size_t hi = 0; hi < holes.size(); ++hi) {
      if (done[hi]) continue;
      size_t i = holes[hi];
      int px = static_cast<int>(i % flow.width);
      int py = static_cast<int>(i / flow.width);
      double gp = luma.at(px, py);
      double wsum = 0, usum = 0, vsum = 0;
      int x0 = std::max(0, px - radius);
      int x1 = std::min(flow.width - 1, px + radius);
      int y0 = std::max(0, py - radius);
      int y1 = std::min(flow.height - 1, py + radius);
      for (int qy = y0; qy <= y1; ++qy)
        for (int qx = x0; qx <= x1; ++qx) {
          size_t qi = flow.idx(qx, qy);
          if (!flow.valid[qi]) continue;  // only original pixels contribute
          double ds = (qx - px) * double(qx - px) + (qy - py) * double(qy - py);
          double dg = luma.at(qx, qy) - gp;
          double w = std::exp(-0.5 * ds / (kSigmaSpatial * kSigmaSpatial)) *
                     std::exp(-0.5 * dg * dg / (kSigmaGuide * kSigmaGuide));
          wsum += w;
          usum += w * flow.u[qi];
          vsum += w * flow.v[qi];
        }
      if (wsum > 0) {
        nu[hi] = static_cast<float>(usum / wsum);
        nv[hi] = static_cast<float>(vsum / wsum);
        done[hi] = 1;
        --remaining;
      }
    }
  }
  for (size_t hi = 0; hi < holes.size(); ++hi) {
    flow.u[holes[hi]] = nu[hi];
    flow.v[holes[hi]] = nv[hi];
  }
}

}  // namespace

std::vector<int> anchor_map(const ProposalSet& R, const Assignment& asg,
                            int width, int height) {
  if (asg.matches.size() != R.size())
    throw std::invalid_argument("anchor_map: assignment does not cover the proposal set");
  std::vector<int> anchor(static_cast<size_t>(width) * height, -1);
  std::vector<double> best(anchor.size(),
                           -std::numeric_limits<double>::infinity());
  for (size_t r = 0; r < R.size(); ++r) {
    double post = asg.matches[r].posterior;
    PixelSpan s = covered_pixels(R[r].box, width, height);
    for (int y = s.y0; y <= s.y1; ++y)
      for (int x = s.x0; x <= s.x1; ++x) {
        size_t i = static_cast<size_t>(y) * width + x;
        if (post > best[i]) {
          best[i] = post;
          anchor[i] = static_cast<int>(r);
        }
      }
  }
  return anchor;
}

Point transfer_pixel(const Point& p, const Box& src, const Box& dst) {
  double sx = dst.width() / src.width();
  double sy = dst.height() / src.height();
  return {dst.x_min + (p.x - src.x_min) * sx,
          dst.y_min + (p.y - src.y_min) * sy};
}

FlowField densify(const ProposalSet& R, const ProposalSet& Rp,
                  const Assignment& asg, int width, int height, FillMode fill,
                  const Image* guide) {
  if (fill == FillMode::joint_bilateral) {
    if (!guide)
      throw std::invalid_argument("densify: joint_bilateral fill needs a guide image");
    if (guide->width != width || guide->height != height)
      throw std::invalid_argument("densify: guide dimensions do not match the flow");
  }
  std::vector<int> anchor = anchor_map(R, asg, width, height);
  FlowField flow(width, height);

  // Transfer pass, then a collision pass over rounded target coordinates:
  // the highest score keeps its match, earlier row-major pixels win ties,
  // losers become holes.
  std::unordered_map<long long, size_t> winner;
  winner.reserve(flow.u.size());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      size_t i = flow.idx(x, y);
      int r = anchor[i];
      if (r < 0) continue;
      const MatchRecord& m = asg.matches[r];
      Point p2 = transfer_pixel({double(x), double(y)}, R[r].box,
                                Rp[m.tgt_id].box);
      flow.u[i] = static_cast<float>(p2.x - x);
      flow.v[i] = static_cast<float>(p2.y - y);
      flow.score[i] = static_cast<float>(m.posterior);
      flow.valid[i] = 1;

      long long key = (static_cast<long long>(std::lround(p2.x)) << 32) |
                      static_cast<unsigned int>(std::lround(p2.y));
      auto [it, fresh] = winner.try_emplace(key, i);
      if (!fresh) {
        size_t prev = it->second;
        if (flow.score[i] > flow.score[prev]) {
          flow.valid[prev] = 0;
          flow.u[prev] = flow.v[prev] = 0;
          flow.score[prev] = 0;
          it->second = i;
        } else {
          flow.valid[i] = 0;
          flow.u[i] = flow.v[i] = 0;
          flow.score[i] = 0;
        }
      }
    }

  switch (fill) {
    case FillMode::none:
      break;
    case FillMode::nearest:
      fill_nearest(flow);
      break;
    case FillMode::joint_bilateral:
      fill_joint_bilateral(flow, *guide);
      break;
  }
  return flow;
}

}  // namespace pf
