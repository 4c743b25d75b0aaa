#pragma once

#include <string>
#include <vector>

#include "pf/geometry.hpp"
#include "pf/image.hpp"
#include "pf/proposals.hpp"

namespace pf {

enum class DescriptorKind { hog, dense, histogram };

const char* kind_name(DescriptorKind kind);
DescriptorKind kind_from_name(const std::string& name);

// One descriptor per proposal id, row-major storage, uniform dimension.
// hog/dense rows are L2-normalized (all-zero rows exempt); histogram rows
// are L1-normalized and nonnegative.
struct DescriptorSet {
  DescriptorKind kind = DescriptorKind::hog;
  int dim = 0;
  std::vector<double> data;

  size_t count() const { return dim ? data.size() / dim : 0; }
  const double* row(size_t i) const { return data.data() + i * dim; }
  double* row(size_t i) { return data.data() + i * dim; }
};

inline constexpr int kPatchSide = 64;
inline constexpr int kHogDim = 1984;  // 8x8 cells x (18+9+4) channels

// Bilinear resample of the box content to a side x side luma patch.
std::vector<double> extract_patch(const Image& img, const Box& b,
                                  int side = kPatchSide);

// Felzenszwalb-variant HOG on a 64x64 patch: 8 px cells, 18 contrast-
// sensitive + 9 contrast-insensitive orientation bins + 4 texture-energy
// channels, 2x2 block normalization with 0.2 clipping, L2-normalized.
// Zero-gradient patches yield the zero vector (normalization exempt).
std::vector<double> hog_descriptor(const std::vector<double>& patch,
                                   int side = kPatchSide);

DescriptorSet describe(const Image& img, const ProposalSet& proposals,
                       int side = kPatchSide);

// Subtract the pooled per-dimension mean, divide by pooled std (+1e-8),
// re-L2-normalize; statistics pooled over every descriptor in `sets`.
// L2 kinds only.
void whiten(std::vector<DescriptorSet*> sets);

// hog/dense: (1 + <f,f'>)/2; histogram: 1 - chi^2/2.  Result in [0,1].
double appearance_prob(const double* f, const double* g, int dim,
                       DescriptorKind kind);
double appearance_prob(const DescriptorSet& a, size_t i,
                       const DescriptorSet& b, size_t j);

// CSV: header `kind,dim,count`, then count rows of dim reals (row i is
// proposal id i).  Import re-normalizes per kind.
DescriptorSet import_descriptors(const std::string& path);
void export_descriptors(const DescriptorSet& set, const std::string& path);

}  // namespace pf
