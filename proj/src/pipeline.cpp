#include "pf/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string_view>
#include <thread>

#include "pf/csv.hpp"

namespace fs = std::filesystem;

namespace pf {

namespace {

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

// "import:a" -> {a, a};  "import:a,b" -> {a, b}
std::pair<std::string, std::string> import_paths(const std::string& spec) {
  std::string rest = spec.substr(std::string_view("import:").size());
  auto comma = rest.find(',');
  if (comma == std::string::npos) return {rest, rest};
  return {rest.substr(0, comma), rest.substr(comma + 1)};
}

void validate(const RunConfig& cfg) {
  auto one_of = [](const std::string& v, std::initializer_list<const char*> allowed,
                   const char* what) {
    for (const char* a : allowed)
      if (v == a) return;
    throw std::invalid_argument(std::string("bad ") + what + " '" + v + "'");
  };
  one_of(cfg.strategy, {"nam", "phm", "lom"}, "strategy");
  if (!starts_with(cfg.proposals, "import:"))
    one_of(cfg.proposals, {"sw", "us", "gs"}, "proposal source");
  if (!starts_with(cfg.features, "import:"))
    one_of(cfg.features, {"hog"}, "feature source");
  one_of(cfg.phm_mode, {"exact", "binned"}, "phm mode");
  one_of(cfg.fill, {"none", "nearest", "joint_bilateral"}, "fill mode");
  one_of(cfg.holes, {"black", "nearest", "use-flow"}, "hole mode");
  if (cfg.budget < 1) throw std::invalid_argument("budget must be >= 1");
  if (cfg.alpha <= 0 || cfg.alpha > 1)
    throw std::invalid_argument("alpha must lie in (0,1]");
  if (cfg.tau_samples < 2)
    throw std::invalid_argument("tau-samples must be >= 2");
  if (cfg.bins.bx < 3 || cfg.bins.by < 3 || cfg.bins.bs < 3)
    throw std::invalid_argument("each hough axis needs >= 3 bins");
  if (cfg.sigma_xy < 0 || cfg.sigma_s <= 0)
    throw std::invalid_argument("kernel bandwidths must be positive");
  if (cfg.threads < 0) throw std::invalid_argument("threads must be >= 0");
}

void ensure_outdir(const RunConfig& cfg) {
  fs::create_directories(cfg.out);
  write_effective_config(cfg, (fs::path(cfg.out) / "config.txt").string());
}

std::string join_out(const RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.out) / name).string();
}

KernelBandwidths bandwidths(const RunConfig& cfg, int width, int height) {
  KernelBandwidths bw = KernelBandwidths::defaults(width, height);
  if (cfg.sigma_xy > 0) bw.sigma_xy = cfg.sigma_xy;
  bw.sigma_s = cfg.sigma_s;
  return bw;
}

HoughBins parse_bins(const std::string& v, const std::string& where) {
  HoughBins b;
  if (sscanf(v.c_str(), "%dx%dx%d", &b.bx, &b.by, &b.bs) != 3)
    throw std::invalid_argument(where + ": bins must look like 16x16x8");
  return b;
}

AnnotatedImage load_annotations(const Image& img, const std::string& kp_path,
                                const std::string& bb_path) {
  return {img.width, img.height, read_bbox(bb_path), read_keypoints(kp_path)};
}

// Warp helper honoring the pipeline hole policy.
Image warp_with_policy(const Image& target, const FlowField& flow,
                       const std::string& holes) {
  if (holes == "use-flow") {
    FlowField full = flow;
    std::fill(full.valid.begin(), full.valid.end(), 1);
    return warp_backward(target, full, HoleMode::black);
  }
  return warp_backward(target, flow,
                       holes == "nearest" ? HoleMode::nearest : HoleMode::black);
}

}  // namespace

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::map<std::string, std::string> kv;
  for (size_t n = 0; const std::string& raw : read_lines(path)) {
    ++n;
    std::string line = raw.substr(0, raw.find('#'));
    auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t");
    line = line.substr(b, e - b + 1);
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + " line " + std::to_string(n) +
                               ": expected key=value");
    auto trim = [](std::string s) {
      auto b2 = s.find_first_not_of(" \t");
      if (b2 == std::string::npos) return std::string();
      auto e2 = s.find_last_not_of(" \t");
      return s.substr(b2, e2 - b2 + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void apply_config(RunConfig& cfg, const std::map<std::string, std::string>& kv,
                  const std::string& where) {
  for (const auto& [key, value] : kv) {
    if (key == "strategy") cfg.strategy = value;
    else if (key == "proposals") cfg.proposals = value;
    else if (key == "budget") cfg.budget = static_cast<int>(parse_int(value, where));
    else if (key == "features") cfg.features = value;
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(value, where));
    else if (key == "shuffle") {
      cfg.has_shuffle = true;
      cfg.shuffle = static_cast<std::uint64_t>(parse_int(value, where));
    } else if (key == "bins") cfg.bins = parse_bins(value, where);
    else if (key == "sigma-xy") cfg.sigma_xy = parse_double(value, where);
    else if (key == "sigma-s") cfg.sigma_s = parse_double(value, where);
    else if (key == "phm-mode") cfg.phm_mode = value;
    else if (key == "fill") cfg.fill = value;
    else if (key == "holes") cfg.holes = value;
    else if (key == "alpha") cfg.alpha = parse_double(value, where);
    else if (key == "tau-samples") cfg.tau_samples = static_cast<int>(parse_int(value, where));
    else if (key == "threads") cfg.threads = static_cast<int>(parse_int(value, where));
    else if (key == "out") cfg.out = value;
    else throw std::invalid_argument(where + ": unknown config key '" + key + "'");
  }
}

void write_effective_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "strategy=" << cfg.strategy << "\n"
      << "proposals=" << cfg.proposals << "\n"
      << "budget=" << cfg.budget << "\n"
      << "features=" << cfg.features << "\n"
      << "seed=" << cfg.seed << "\n";
  if (cfg.has_shuffle) out << "shuffle=" << cfg.shuffle << "\n";
  out << "bins=" << cfg.bins.bx << "x" << cfg.bins.by << "x" << cfg.bins.bs
      << "\n"
      << "sigma-xy=" << format_double(cfg.sigma_xy) << "\n"
      << "sigma-s=" << format_double(cfg.sigma_s) << "\n"
      << "phm-mode=" << cfg.phm_mode << "\n"
      << "fill=" << cfg.fill << "\n"
      << "holes=" << cfg.holes << "\n"
      << "alpha=" << format_double(cfg.alpha) << "\n"
      << "tau-samples=" << cfg.tau_samples << "\n"
      << "threads=" << cfg.threads << "\n"
      << "out=" << cfg.out << "\n";
  if (!out) throw std::runtime_error(path + ": write failed");
}

int effective_threads(const RunConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  if (const char* env = std::getenv("PROPOSALFLOW_THREADS")) {
    int n = static_cast<int>(parse_int(env, "PROPOSALFLOW_THREADS"));
    if (n > 0) return n;
  }
  return 1;
}

FillMode parse_fill_mode(const std::string& name) {
  if (name == "none") return FillMode::none;
  if (name == "nearest") return FillMode::nearest;
  if (name == "joint_bilateral") return FillMode::joint_bilateral;
  throw std::invalid_argument("bad fill mode '" + name + "'");
}

PhmMode parse_phm_mode(const std::string& name) {
  if (name == "exact") return PhmMode::exact;
  if (name == "binned") return PhmMode::binned;
  throw std::invalid_argument("bad phm mode '" + name + "'");
}

std::vector<double> tau_grid(int samples) {
  std::vector<double> taus(samples);
  for (int i = 0; i < samples; ++i)
    taus[i] = static_cast<double>(i) / (samples - 1);
  return taus;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  // splitmix64 step over the combined value
  std::uint64_t z = base + (salt + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

ProposalSet make_proposals(const RunConfig& cfg, int width, int height,
                           std::uint64_t seed,
                           const std::string& import_path) {
  if (!import_path.empty()) {
    auto res = import_proposals(
        import_path, width, height, cfg.budget,
        cfg.has_shuffle ? std::optional<std::uint64_t>(cfg.shuffle)
                        : std::nullopt);
    if (res.rejected)
      std::cerr << "warning: " << import_path << ": rejected " << res.rejected
                << " degenerate proposal rows\n";
    return std::move(res.set);
  }
  if (cfg.proposals == "sw") return sliding_window(width, height, cfg.budget);
  if (cfg.proposals == "us")
    return uniform_sample(width, height, cfg.budget, seed);
  if (cfg.proposals == "gs")
    return gaussian_sample(width, height, cfg.budget, seed);
  throw std::invalid_argument("bad proposal source '" + cfg.proposals + "'");
}

DescriptorSet make_descriptors(const RunConfig& cfg, const Image& img,
                               const ProposalSet& props,
                               const std::string& import_path) {
  DescriptorSet set;
  if (!import_path.empty())
    set = import_descriptors(import_path);
  else
    set = describe(img, props);
  if (set.count() != props.size())
    throw std::runtime_error(
        "descriptor count " + std::to_string(set.count()) +
        " does not match proposal count " + std::to_string(props.size()));
  return set;
}

MatchResult match_pair(const RunConfig& cfg, const Image& src,
                       const Image& dst, std::uint64_t src_seed,
                       std::uint64_t dst_seed) {
  MatchResult res;
  std::string src_imp, dst_imp;
  if (starts_with(cfg.proposals, "import:"))
    std::tie(src_imp, dst_imp) = import_paths(cfg.proposals);
  res.src_props = make_proposals(cfg, src.width, src.height, src_seed, src_imp);
  res.dst_props = make_proposals(cfg, dst.width, dst.height, dst_seed, dst_imp);

  std::string src_fimp, dst_fimp;
  if (starts_with(cfg.features, "import:"))
    std::tie(src_fimp, dst_fimp) = import_paths(cfg.features);
  res.src_desc = make_descriptors(cfg, src, res.src_props, src_fimp);
  res.dst_desc = make_descriptors(cfg, dst, res.dst_props, dst_fimp);
  // Whitening statistics are pooled over the pair; built-in HOG only —
  // imported descriptors arrive in their own normalization.
  if (res.src_desc.kind == DescriptorKind::hog &&
      res.dst_desc.kind == DescriptorKind::hog)
    whiten({&res.src_desc, &res.dst_desc});

  Matrix A = appearance_matrix(res.src_desc, res.dst_desc);
  res.asg = run_strategy(cfg, res.src_props, res.dst_props, A, src.width,
                         src.height);
  return res;
}

Assignment run_strategy(const RunConfig& cfg, const ProposalSet& R,
                        const ProposalSet& Rp, const Matrix& A, int src_width,
                        int src_height) {
  KernelBandwidths bw = bandwidths(cfg, src_width, src_height);
  if (cfg.strategy == "nam") return nam(R, Rp, A);
  if (cfg.strategy == "phm")
    return phm(R, Rp, A, bw, parse_phm_mode(cfg.phm_mode), cfg.bins);
  if (cfg.strategy == "lom") return lom(R, Rp, A, bw);
  throw std::invalid_argument("bad strategy '" + cfg.strategy + "'");
}

int cmd_propose(const RunConfig& cfg, const std::string& image_path) {
  validate(cfg);
  Image img = load_image(image_path);
  std::string imp;
  if (starts_with(cfg.proposals, "import:")) imp = import_paths(cfg.proposals).first;
  ProposalSet props =
      make_proposals(cfg, img.width, img.height, derive_seed(cfg.seed, 0), imp);
  ensure_outdir(cfg);
  export_proposals(props, join_out(cfg, "proposals.csv"));
  std::cout << "wrote " << props.size() << " proposals\n";
  return 0;
}

int cmd_describe(const RunConfig& cfg, const std::string& image_path,
                 const std::string& proposals_path) {
  validate(cfg);
  Image img = load_image(image_path);
  auto props = import_proposals(proposals_path, img.width, img.height,
                                cfg.budget, std::nullopt);
  std::string imp;
  if (starts_with(cfg.features, "import:")) imp = import_paths(cfg.features).first;
  DescriptorSet desc = make_descriptors(cfg, img, props.set, imp);
  ensure_outdir(cfg);
  export_descriptors(desc, join_out(cfg, "descriptors.csv"));
  std::cout << "wrote " << desc.count() << " descriptors of dim " << desc.dim
            << "\n";
  return 0;
}

namespace {

void write_match_artifacts(const RunConfig& cfg, const MatchResult& m) {
  export_proposals(m.src_props, join_out(cfg, "src_proposals.csv"));
  export_proposals(m.dst_props, join_out(cfg, "dst_proposals.csv"));
  export_matches(m.asg, join_out(cfg, "matches.csv"));
}

}  // namespace

int cmd_match(const RunConfig& cfg, const std::string& src_image,
              const std::string& dst_image) {
  validate(cfg);
  Image src = load_image(src_image);
  Image dst = load_image(dst_image);
  MatchResult m = match_pair(cfg, src, dst, derive_seed(cfg.seed, 0),
                             derive_seed(cfg.seed, 1));
  ensure_outdir(cfg);
  write_match_artifacts(cfg, m);
  std::cout << "matched " << m.src_props.size() << " -> "
            << m.dst_props.size() << " proposals (" << cfg.strategy << ")\n";
  return 0;
}

int cmd_flow(const RunConfig& cfg, const std::string& src_image,
             const std::string& dst_image) {
  validate(cfg);
  Image src = load_image(src_image);
  Image dst = load_image(dst_image);
  MatchResult m = match_pair(cfg, src, dst, derive_seed(cfg.seed, 0),
                             derive_seed(cfg.seed, 1));
  FlowField flow = densify(m.src_props, m.dst_props, m.asg, src.width,
                           src.height, parse_fill_mode(cfg.fill), &src);
  ensure_outdir(cfg);
  write_match_artifacts(cfg, m);
  write_flo(flow, join_out(cfg, "flow.flo"));
  save_image(warp_with_policy(dst, flow, cfg.holes),
             join_out(cfg, dst.channels == 3 ? "warped.ppm" : "warped.pgm"));
  std::cout << "wrote flow " << flow.width << "x" << flow.height << "\n";
  return 0;
}

int cmd_warp(const RunConfig& cfg, const std::string& dst_image,
             const std::string& flo_path) {
  validate(cfg);
  Image dst = load_image(dst_image);
  FlowField flow = read_flo(flo_path);
  ensure_outdir(cfg);
  save_image(warp_with_policy(dst, flow, cfg.holes),
             join_out(cfg, dst.channels == 3 ? "warped.ppm" : "warped.pgm"));
  std::cout << "wrote warped image\n";
  return 0;
}

int cmd_eval_region(const RunConfig& cfg, const std::string& src_image,
                    const std::string& dst_image,
                    const std::string& src_proposals,
                    const std::string& dst_proposals,
                    const std::string& matches, const std::string& src_kp,
                    const std::string& dst_kp, const std::string& src_bb,
                    const std::string& dst_bb) {
  validate(cfg);
  Image src = load_image(src_image);
  Image dst = load_image(dst_image);
  auto R = import_proposals(src_proposals, src.width, src.height, cfg.budget,
                            std::nullopt);
  auto Rp = import_proposals(dst_proposals, dst.width, dst.height, cfg.budget,
                             std::nullopt);
  Assignment asg = import_matches(matches);
  if (asg.matches.size() != R.set.size())
    throw std::runtime_error(matches + ": match rows do not cover the proposal set");
  AnnotatedImage src_anno = load_annotations(src, src_kp, src_bb);
  AnnotatedImage dst_anno = load_annotations(dst, dst_kp, dst_bb);

  GroundTruth gt = ground_truth(R.set, src_anno, dst_anno);
  auto taus = tau_grid(cfg.tau_samples);
  MetricCurve pcr = pcr_curve(asg, Rp.set, gt, taus);
  MetricCurve miou = miou_at_k(asg, Rp.set, gt);
  MetricCurve ub = upper_bound_curve(Rp.set, gt, taus);

  ensure_outdir(cfg);
  write_curve_csv(pcr, "tau", join_out(cfg, "pcr.csv"));
  write_curve_csv(miou, "k", join_out(cfg, "miou.csv"));
  write_curve_csv(ub, "tau", join_out(cfg, "upper_bound.csv"));
  std::cout << "pcr_auc=" << format_double(pcr.auc)
            << " miou_auc=" << format_double(miou.auc)
            << " ub_auc=" << format_double(ub.auc)
            << " rs_count=" << gt.members.size() << "\n";
  return 0;
}

int cmd_eval_flow(const RunConfig& cfg, const std::string& flo_path,
                  const std::string& src_kp, const std::string& dst_kp,
                  const std::string& dst_bb) {
  validate(cfg);
  FlowField flow = read_flo(flo_path);
  auto skps = read_keypoints(src_kp);
  auto dkps = read_keypoints(dst_kp);
  Box bb = read_bbox(dst_bb);
  double v = pck(flow, skps, dkps, bb, cfg.alpha);
  std::cout << "pck@" << format_double(cfg.alpha) << "=" << format_double(v)
            << "\n";
  return 0;
}

namespace {

std::string sanitize_pair_id(const std::string& id) {
  if (id.empty()) throw std::runtime_error("empty pair_id in manifest");
  for (char c : id)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' &&
        c != '.')
      throw std::runtime_error("pair_id '" + id +
                               "' may only contain [A-Za-z0-9_.-]");
  return id;
}

std::string resolve(const fs::path& base, const std::string& rel) {
  fs::path p(rel);
  return p.is_absolute() ? p.string() : (base / p).string();
}

MetricRecord run_bench_pair(const RunConfig& cfg, const fs::path& base,
                            const ManifestEntry& entry, size_t index) {
  auto stage = [&](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      throw std::runtime_error("pair " + entry.pair_id + ", stage " + name +
                               ": " + e.what());
    }
  };

  std::string pair_id = sanitize_pair_id(entry.pair_id);
  RunConfig pair_cfg = cfg;
  pair_cfg.out = (fs::path(cfg.out) / pair_id).string();
  fs::create_directories(pair_cfg.out);

  Image src = stage("load", [&] { return load_image(resolve(base, entry.src_image)); });
  Image dst = stage("load", [&] { return load_image(resolve(base, entry.dst_image)); });
  AnnotatedImage src_anno = stage("annotations", [&] {
    return load_annotations(src, resolve(base, entry.src_kp),
                            resolve(base, entry.src_bb));
  });
  AnnotatedImage dst_anno = stage("annotations", [&] {
    return load_annotations(dst, resolve(base, entry.dst_kp),
                            resolve(base, entry.dst_bb));
  });

  MatchResult m = stage("match", [&] {
    return match_pair(cfg, src, dst, derive_seed(cfg.seed, 2 * index),
                      derive_seed(cfg.seed, 2 * index + 1));
  });
  FlowField flow = stage("flow", [&] {
    return densify(m.src_props, m.dst_props, m.asg, src.width, src.height,
                   parse_fill_mode(cfg.fill), &src);
  });

  GroundTruth gt = stage("ground-truth", [&] {
    return ground_truth(m.src_props, src_anno, dst_anno);
  });
  auto taus = tau_grid(cfg.tau_samples);
  MetricCurve pcr = stage("eval", [&] { return pcr_curve(m.asg, m.dst_props, gt, taus); });
  MetricCurve miou = stage("eval", [&] { return miou_at_k(m.asg, m.dst_props, gt); });
  MetricCurve ub = stage("eval", [&] { return upper_bound_curve(m.dst_props, gt, taus); });
  double pck_v = stage("eval", [&] {
    return pck(flow, src_anno.keypoints, dst_anno.keypoints, dst_anno.box,
               cfg.alpha);
  });

  stage("write", [&] {
    write_match_artifacts(pair_cfg, m);
    write_flo(flow, join_out(pair_cfg, "flow.flo"));
    save_image(warp_with_policy(dst, flow, cfg.holes),
               join_out(pair_cfg,
                        dst.channels == 3 ? "warped.ppm" : "warped.pgm"));
    write_curve_csv(pcr, "tau", join_out(pair_cfg, "pcr.csv"));
    write_curve_csv(miou, "k", join_out(pair_cfg, "miou.csv"));
    write_curve_csv(ub, "tau", join_out(pair_cfg, "upper_bound.csv"));
    return 0;
  });

  return {pair_id, cfg.strategy, pcr.auc, miou.auc, pck_v,
          static_cast<int>(gt.members.size())};
}

}  // namespace

int cmd_bench(const RunConfig& cfg, const std::string& manifest_path) {
  validate(cfg);
  if (starts_with(cfg.proposals, "import:") ||
      starts_with(cfg.features, "import:"))
    throw std::invalid_argument(
        "bench generates proposals/features per pair; import paths are only "
        "available in the stage subcommands");
  auto entries = read_manifest(manifest_path);
  fs::path base = fs::path(manifest_path).parent_path();
  ensure_outdir(cfg);

  std::vector<MetricRecord> records(entries.size());
  std::vector<std::exception_ptr> errors(entries.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= entries.size()) break;
      try {
        records[i] = run_bench_pair(cfg, base, entries[i], i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  int nthreads = static_cast<int>(
      std::min<size_t>(effective_threads(cfg), entries.size()));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  write_metrics_csv(records, cfg.alpha, join_out(cfg, "metrics.csv"));
  write_metrics_json(records, cfg.alpha, join_out(cfg, "metrics.json"));
  MetricRecord agg;
  for (const auto& r : records) {
    agg.pcr_auc += r.pcr_auc / records.size();
    agg.miou_auc += r.miou_auc / records.size();
    agg.pck += r.pck / records.size();
  }
  std::cout << "pairs=" << records.size()
            << " mean_pcr_auc=" << format_double(agg.pcr_auc)
            << " mean_miou_auc=" << format_double(agg.miou_auc) << " mean_pck@"
            << format_double(cfg.alpha) << "=" << format_double(agg.pck)
            << "\n";
  return 0;
}

}  // namespace pf
