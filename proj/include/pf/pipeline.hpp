#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pf/benchmark.hpp"
#include "pf/features.hpp"
#include "pf/flowfield.hpp"
#include "pf/image.hpp"
#include "pf/matching.hpp"
#include "pf/proposals.hpp"

namespace pf {

struct RunConfig {
  std::string strategy = "lom";        // nam | phm | lom
  std::string proposals = "sw";        // sw | us | gs | import:<path>[,<path>]
  int budget = 1000;
  std::string features = "hog";        // hog | import:<path>[,<path>]
  std::uint64_t seed = 0;
  bool has_shuffle = false;            // RP-style random import selection
  std::uint64_t shuffle = 0;
  HoughBins bins;
  double sigma_xy = 0.0;               // 0 = 0.1 * max(W,H) of source image
  double sigma_s = 0.5;
  std::string phm_mode = "binned";     // exact | binned
  std::string fill = "joint_bilateral";  // none | nearest | joint_bilateral
  std::string holes = "use-flow";      // warp: black | nearest | use-flow
  double alpha = 0.1;
  int tau_samples = 101;
  int threads = 0;                     // 0 = $PROPOSALFLOW_THREADS or 1
  std::string out = "out";
};

// key=value lines, '#' comments; keys match the long flag names.
std::map<std::string, std::string> read_config_file(const std::string& path);
void apply_config(RunConfig& cfg, const std::map<std::string, std::string>& kv,
                  const std::string& where);
void write_effective_config(const RunConfig& cfg, const std::string& path);

int effective_threads(const RunConfig& cfg);
FillMode parse_fill_mode(const std::string& name);
PhmMode parse_phm_mode(const std::string& name);
std::vector<double> tau_grid(int samples);

// Deterministic per-task seed derivation.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

// Stage helpers shared by the CLI subcommands and the bench runner.
ProposalSet make_proposals(const RunConfig& cfg, int width, int height,
                           std::uint64_t seed, const std::string& import_path);
DescriptorSet make_descriptors(const RunConfig& cfg, const Image& img,
                               const ProposalSet& props,
                               const std::string& import_path);

struct MatchResult {
  ProposalSet src_props, dst_props;
  DescriptorSet src_desc, dst_desc;
  Assignment asg;
};

// Full proposal -> descriptor -> whitening -> strategy chain for a pair.
MatchResult match_pair(const RunConfig& cfg, const Image& src,
                       const Image& dst, std::uint64_t src_seed,
                       std::uint64_t dst_seed);

Assignment run_strategy(const RunConfig& cfg, const ProposalSet& R,
                        const ProposalSet& Rp, const Matrix& A, int src_width,
                        int src_height);

// Subcommand drivers; each writes its artifacts plus config.txt under
// cfg.out and returns a process exit code.
int cmd_propose(const RunConfig& cfg, const std::string& image_path);
int cmd_describe(const RunConfig& cfg, const std::string& image_path,
                 const std::string& proposals_path);
int cmd_match(const RunConfig& cfg, const std::string& src_image,
              const std::string& dst_image);
int cmd_flow(const RunConfig& cfg, const std::string& src_image,
             const std::string& dst_image);
int cmd_warp(const RunConfig& cfg, const std::string& dst_image,
             const std::string& flo_path);
int cmd_eval_region(const RunConfig& cfg, const std::string& src_image,
                    const std::string& dst_image,
                    const std::string& src_proposals,
                    const std::string& dst_proposals,
                    const std::string& matches, const std::string& src_kp,
                    const std::string& dst_kp, const std::string& src_bb,
                    const std::string& dst_bb);
int cmd_eval_flow(const RunConfig& cfg, const std::string& flo_path,
                  const std::string& src_kp, const std::string& dst_kp,
                  const std::string& dst_bb);

// Manifest-driven batch run with a worker pool; outputs are byte-identical
// for any thread count.
int cmd_bench(const RunConfig& cfg, const std::string& manifest_path);

}  // namespace pf
