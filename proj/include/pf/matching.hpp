#pragma once

#include <string>
#include <vector>

#include "pf/features.hpp"
#include "pf/geometry.hpp"
#include "pf/proposals.hpp"

namespace pf {

struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c) {}
  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return data[static_cast<size_t>(r) * cols + c];
  }
};

struct KernelBandwidths {
  double sigma_xy = 0.0;
  double sigma_s = 0.5;  // log2 scale units

  // sigma_xy = 0.1 * max(W, H) of the source image
  static KernelBandwidths defaults(int width, int height) {
    return {0.1 * std::max(width, height), 0.5};
  }
};

double gauss_kernel(const Offset& d, const KernelBandwidths& bw);

struct MatchRecord {
  int src_id = 0;
  int tgt_id = 0;
  double posterior = 0.0;
  double appearance = 0.0;
  double geometric = 0.0;
};

struct Assignment {
  std::string strategy;
  std::vector<MatchRecord> matches;  // index == src_id
};

struct LocalOffsetField {
  std::vector<Offset> x_star;
  std::vector<int> neighbor_count;
};

struct HoughBins {
  int bx = 16, by = 16, bs = 8;
  // vote splat truncation radius in bin widths (also the splat sigma unit);
  // large values cover the whole grid, making total mass equal sum(A) exactly
  double splat_radius = 2.0;
};

struct HoughHistogram {
  int bx = 0, by = 0, bs = 0;
  double x_min = 0, y_min = 0, s_min = 0;
  double x_width = 1, y_width = 1, s_width = 1;
  std::vector<double> h;  // [(ix*by + iy)*bs + is]

  double center_x(int b) const { return x_min + (b + 0.5) * x_width; }
  double center_y(int b) const { return y_min + (b + 0.5) * y_width; }
  double center_s(int b) const { return s_min + (b + 0.5) * s_width; }
  double total_mass() const;
};

// A[i][j] = appearance_prob(f_i, f'_j)
Matrix appearance_matrix(const DescriptorSet& F, const DescriptorSet& G);

// Appearance only: phi(i) = argmax_j A[i][j], geometric term == 1.
Assignment nam(const ProposalSet& R, const ProposalSet& Rp, const Matrix& A);

// Offset-space vote accumulation: every pair (i,j) adds A[i][j] of mass,
// split over bins near gamma(s_i) - gamma(s'_j) with truncated-Gaussian
// weights (sigma = one bin width per axis, radius 2 sigma, renormalized to
// preserve mass).  The grid spans the observed offset range padded by one
// bin per side.
HoughHistogram hough_histogram(const ProposalSet& R, const ProposalSet& Rp,
                               const Matrix& A, const HoughBins& bins = {});

enum class PhmMode { exact, binned };

inline constexpr long long kPhmExactPairLimit = 2000;

// Hough matching: geometric term g_ij = sum_x K(o_ij - x) h(x), where x
// ranges over all pairwise offsets (exact, n*n' <= 2000) or over the bin
// centers of hough_histogram (binned).
Assignment phm(const ProposalSet& R, const ProposalSet& Rp, const Matrix& A,
               const KernelBandwidths& bw, PhmMode mode = PhmMode::binned,
               const HoughBins& bins = {});

// The full posterior matrix p_ij = A_ij * g_ij behind phm's per-row argmax.
Matrix phm_posterior(const ProposalSet& R, const ProposalSet& Rp,
                     const Matrix& A, const KernelBandwidths& bw,
                     PhmMode mode = PhmMode::binned,
                     const HoughBins& bins = {});

// Ids whose boxes intersect R[i] with positive area; always contains i.
std::vector<int> neighborhood(const ProposalSet& R, int i);

// x*_i = geometric median of the neighbors' appearance-match offsets.
LocalOffsetField local_offsets(const ProposalSet& R, const ProposalSet& Rp,
                               const Matrix& A);

// Local offset matching: g_ij = K(o_ij - x*_i) * sum of the neighbors'
// appearance-match scores.
Assignment lom(const ProposalSet& R, const ProposalSet& Rp, const Matrix& A,
               const KernelBandwidths& bw);

// Match CSV: src_id,tgt_id,posterior,appearance,geometric sorted by src_id.
void export_matches(const Assignment& asg, const std::string& path);
Assignment import_matches(const std::string& path);

}  // namespace pf
