#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pf/geometry.hpp"

namespace pf {

struct Proposal {
  Box box;
  double score = 0.0;  // generator confidence, 0 if N/A
  int id = 0;          // index within its set
};

struct ProposalSet {
  int width = 0;
  int height = 0;
  std::vector<Proposal> items;

  size_t size() const { return items.size(); }
  const Proposal& operator[](size_t i) const { return items[i]; }
};

// Deterministic multi-scale grid: window sides geometric with ratio sqrt(2)
// from 16 px up to min(W,H); aspect ratios {1/2, 1/sqrt2, 1, sqrt2, 2} at
// constant area; stride = side/4; enumerated scale -> aspect -> row -> col,
// then subsampled evenly to `limit`.
ProposalSet sliding_window(int width, int height, int limit);

// n boxes: centers uniform over the image, side log-uniform in
// [log 16, log min(W,H)], aspect log-uniform in [-log 2, log 2], clipped.
ProposalSet uniform_sample(int width, int height, int n, std::uint64_t seed);

// As uniform_sample but centers ~ Normal(image center, dims/4 per axis),
// out-of-bounds centers resampled.
ProposalSet gaussian_sample(int width, int height, int n, std::uint64_t seed);

struct ImportResult {
  ProposalSet set;
  int rejected = 0;  // degenerate rows dropped (zero or sub-minimum area)
};

// CSV with header x_min,y_min,x_max,y_max[,score].  Keeps top-`limit` by
// score when scores are present (ties by file order), else the first
// `limit` rows; with `shuffle_seed`, a random `limit`-subset instead.
ImportResult import_proposals(const std::string& path, int width, int height,
                              int limit,
                              std::optional<std::uint64_t> shuffle_seed = {});

void export_proposals(const ProposalSet& set, const std::string& path);

}  // namespace pf
