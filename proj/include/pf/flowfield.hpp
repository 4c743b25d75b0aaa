#pragma once

#include <vector>

#include "pf/flow_io.hpp"
#include "pf/geometry.hpp"
#include "pf/image.hpp"
#include "pf/matching.hpp"
#include "pf/proposals.hpp"

namespace pf {

// Per pixel: id of the covering region with the highest posterior
// (ties -> lowest id), or -1 where no region covers the pixel.
std::vector<int> anchor_map(const ProposalSet& R, const Assignment& asg,
                            int width, int height);

// Axis-aligned affine transfer between anchor boxes.
Point transfer_pixel(const Point& p, const Box& src, const Box& dst);

enum class FillMode { none, nearest, joint_bilateral };

// Region matches to dense flow: per-pixel anchor transfer, collision pass
// at rounded target coordinates (highest score wins, ties -> first source
// pixel in row-major order), then hole filling.  The validity mask keeps
// the pre-fill state and filled pixels keep score 0.
FlowField densify(const ProposalSet& R, const ProposalSet& Rp,
                  const Assignment& asg, int width, int height,
                  FillMode fill = FillMode::joint_bilateral,
                  const Image* guide = nullptr);

}  // namespace pf
