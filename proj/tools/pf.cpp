#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

#include "pf/pipeline.hpp"

namespace {

const char* const kConfigKeys[] = {
    "strategy", "proposals", "budget",   "features", "seed",        "shuffle",
    "bins",     "sigma-xy",  "sigma-s",  "phm-mode", "fill",        "holes",
    "alpha",    "tau-samples", "threads", "out"};

void add_common_options(CLI::App& app) {
  app.add_option("--config", "key=value config file (flags take precedence)");
  app.add_option("--strategy", "matching strategy: nam | phm | lom");
  app.add_option("--proposals",
                 "proposal source: sw | us | gs | import:<path>[,<path>]");
  app.add_option("--budget", "proposal budget per image");
  app.add_option("--features", "descriptors: hog | import:<path>[,<path>]");
  app.add_option("--seed", "base RNG seed (required for us/gs sources)");
  app.add_option("--shuffle", "random-subset seed for imported proposals");
  app.add_option("--bins", "hough bins as BXxBYxBS, e.g. 16x16x8");
  app.add_option("--sigma-xy", "offset kernel bandwidth, px (0 = auto)");
  app.add_option("--sigma-s", "log-scale kernel bandwidth");
  app.add_option("--phm-mode", "hough evidence: exact | binned");
  app.add_option("--fill", "flow hole filling: none | nearest | joint_bilateral");
  app.add_option("--holes", "warp holes: black | nearest | use-flow");
  app.add_option("--alpha", "PCK tolerance as a fraction of max box side");
  app.add_option("--tau-samples", "number of tau grid samples on [0,1]");
  app.add_option("--threads", "worker threads ($PROPOSALFLOW_THREADS fallback)");
  app.add_option("--out", "output directory");
}

pf::RunConfig merge_config(const CLI::App& app) {
  std::map<std::string, std::string> flag_kv;
  for (const char* key : kConfigKeys) {
    const CLI::Option* opt = app.get_option("--" + std::string(key));
    if (opt->count()) flag_kv[key] = opt->results().back();
  }

  pf::RunConfig cfg;
  std::map<std::string, std::string> file_kv;
  const CLI::Option* copt = app.get_option("--config");
  if (copt->count()) {
    std::string path = copt->results().back();
    file_kv = pf::read_config_file(path);
    pf::apply_config(cfg, file_kv, path);
  }
  pf::apply_config(cfg, flag_kv, "flags");

  bool stochastic = cfg.proposals == "us" || cfg.proposals == "gs";
  if (stochastic && !flag_kv.count("seed") && !file_kv.count("seed"))
    throw std::invalid_argument("proposal source '" + cfg.proposals +
                                "' is stochastic; pass --seed");
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"proposal-flow region matching, dense flow, and benchmarks"};
  app.require_subcommand(1);
  add_common_options(app);

  std::string image, proposals_csv, src, dst, flo, manifest;
  std::string src_props, dst_props, matches, src_kp, dst_kp, src_bb, dst_bb;

  auto* propose = app.add_subcommand("propose", "generate or import proposals");
  propose->add_option("image", image, "input image (pgm/ppm)")->required();

  auto* describe =
      app.add_subcommand("describe", "extract descriptors for proposals");
  describe->add_option("image", image)->required();
  describe->add_option("proposals", proposals_csv, "proposals CSV")->required();

  auto* match = app.add_subcommand("match", "match proposals between a pair");
  match->add_option("src", src)->required();
  match->add_option("dst", dst)->required();

  auto* flow = app.add_subcommand("flow", "match and densify into a flow field");
  flow->add_option("src", src)->required();
  flow->add_option("dst", dst)->required();

  auto* warp = app.add_subcommand("warp", "warp an image backward by a flow");
  warp->add_option("image", image, "image to sample (the match target)")
      ->required();
  warp->add_option("flow", flo, ".flo file")->required();

  auto* evr = app.add_subcommand("eval-region", "region-matching metrics");
  evr->add_option("src", src)->required();
  evr->add_option("dst", dst)->required();
  evr->add_option("src-proposals", src_props)->required();
  evr->add_option("dst-proposals", dst_props)->required();
  evr->add_option("matches", matches)->required();
  evr->add_option("src-keypoints", src_kp)->required();
  evr->add_option("dst-keypoints", dst_kp)->required();
  evr->add_option("src-bbox", src_bb)->required();
  evr->add_option("dst-bbox", dst_bb)->required();

  auto* evf = app.add_subcommand("eval-flow", "PCK of a dense flow field");
  evf->add_option("flow", flo)->required();
  evf->add_option("src-keypoints", src_kp)->required();
  evf->add_option("dst-keypoints", dst_kp)->required();
  evf->add_option("dst-bbox", dst_bb)->required();

  auto* bench = app.add_subcommand("bench", "run the benchmark over a manifest");
  bench->add_option("manifest", manifest, "pair manifest CSV")->required();

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    pf::RunConfig cfg = merge_config(app);
    if (propose->parsed()) return pf::cmd_propose(cfg, image);
    if (describe->parsed()) return pf::cmd_describe(cfg, image, proposals_csv);
    if (match->parsed()) return pf::cmd_match(cfg, src, dst);
    if (flow->parsed()) return pf::cmd_flow(cfg, src, dst);
    if (warp->parsed()) return pf::cmd_warp(cfg, image, flo);
    if (evr->parsed())
      return pf::cmd_eval_region(cfg, src, dst, src_props, dst_props, matches,
                                 src_kp, dst_kp, src_bb, dst_bb);
    if (evf->parsed()) return pf::cmd_eval_flow(cfg, flo, src_kp, dst_kp, dst_bb);
    if (bench->parsed()) return pf::cmd_bench(cfg, manifest);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
