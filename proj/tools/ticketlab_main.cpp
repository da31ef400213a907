// Command-line experiment harness: oracle generation, training, landscape
// probes and the grid experiments, all emitting CSV plus a JSON manifest.

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ticketlab/experiments.hpp"
#include "ticketlab/io.hpp"
#include "ticketlab/risk.hpp"
#include "ticketlab/version.hpp"

namespace tl = ticketlab;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string from_manifest;
  std::string out_dir = "out";
  std::string stamp;  // defaults to a wall-clock timestamp
  std::uint64_t seed = 1;
  bool seed_given = false;
  int threads = 1;
  int trials = -1;
  bool paper_scale = false;
  std::vector<std::string> overrides;  // key=value
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "key=value or JSON configuration file");
  cmd->add_option("--from-manifest", opts.from_manifest,
                  "reproduce a previous run from its manifest");
  cmd->add_option("--out-dir", opts.out_dir, "output directory");
  cmd->add_option("--stamp", opts.stamp, "output name stamp (default: timestamp)");
  cmd->add_flag("--paper-scale", opts.paper_scale,
                "use the full-scale experiment configuration");
  cmd->add_option("--seed", opts.seed, "master seed")->each([&](const std::string&) {
    opts.seed_given = true;
  });
  cmd->add_option("--threads", opts.threads, "worker thread cap");
  cmd->add_option("--trials", opts.trials, "trials per grid cell");
  cmd->add_option("--set", opts.overrides, "extra key=value overrides")->take_all();
}

tl::Config resolve_config(const CommonOpts& opts) {
  tl::Config cfg;
  if (!opts.from_manifest.empty()) {
    std::ifstream in(opts.from_manifest);
    if (!in) throw std::runtime_error("cannot open manifest " + opts.from_manifest);
    std::stringstream buf;
    buf << in.rdbuf();
    const tl::RunManifest manifest = tl::RunManifest::from_json(buf.str());
    for (const auto& [k, v] : manifest.config) cfg.set(k, v);
  }
  if (!opts.config_path.empty()) {
    const tl::Config file_cfg = tl::Config::from_file(opts.config_path);
    for (const auto& [k, v] : file_cfg.values()) cfg.set(k, v);
  }
  for (const std::string& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value: " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.seed_given) cfg.set("seed", std::to_string(opts.seed));
  if (opts.trials > 0) cfg.set("trials", std::to_string(opts.trials));
  cfg.set("paper_scale", opts.paper_scale ? "1" : cfg.get_string("paper_scale", "0"));
  return cfg;
}

std::string default_stamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", std::gmtime(&tt));
  return buf;
}

std::string config_digest(const tl::Config& cfg) {
  std::string flat;
  for (const auto& [k, v] : cfg.values()) flat += k + "=" + v + "\n";
  return tl::content_hash(flat).substr(0, 8);
}

// Output naming: <experiment>-<stamp>-<config-hash>.
std::filesystem::path output_base(const CommonOpts& opts, const std::string& experiment,
                                  const tl::Config& cfg) {
  const std::string stamp = opts.stamp.empty() ? default_stamp() : opts.stamp;
  return std::filesystem::path(opts.out_dir) / (experiment + "-" + stamp + "-" + config_digest(cfg));
}

class ManifestWriter {
 public:
  ManifestWriter(std::string command, const tl::Config& cfg, std::uint64_t master_seed)
      : start_(std::chrono::steady_clock::now()) {
    manifest_.command = std::move(command);
    manifest_.config = cfg.values();
    manifest_.master_seed = master_seed;
    manifest_.version = tl::kVersion;
  }

  void add(const std::filesystem::path& path, const std::string& content) {
    manifest_.outputs.push_back(tl::write_output(path, content));
  }
  void stat(const std::string& key, double value) { manifest_.stats[key] = value; }

  void finish(const std::filesystem::path& base) {
    manifest_.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const auto path = base.string() + "-manifest.json";
    tl::write_output(path, manifest_.to_json());
    std::cout << "wrote " << path << "\n";
    for (const tl::ManifestEntry& e : manifest_.outputs) {
      std::cout << "wrote " << e.path << " (" << e.hash << ")\n";
    }
  }

 private:
  tl::RunManifest manifest_;
  std::chrono::steady_clock::time_point start_;
};

tl::OverlapMode parse_overlap(const std::string& s) {
  if (s == "almost_overlapped") return tl::OverlapMode::kAlmostOverlapped;
  if (s == "disjoint") return tl::OverlapMode::kDisjoint;
  if (s == "random") return tl::OverlapMode::kRandom;
  throw std::invalid_argument("overlap_mode must be almost_overlapped, disjoint or random");
}

tl::TrainConfig train_config_from(const tl::Config& cfg) {
  tl::TrainConfig train;
  train.eta = cfg.get_double("eta", 0.5);
  train.beta = cfg.get_double("beta", 0.2);
  train.max_iters = cfg.get_int("max_iters", cfg.get_string("paper_scale", "0") == "1" ? 10000 : 2000);
  train.rel_change_tol = cfg.get_double("rel_change_tol", 1e-8);
  const std::string mode = cfg.get_string("partition_mode", "reuse_full");
  if (mode == "reuse_full") {
    train.partition_mode = tl::PartitionMode::kReuseFull;
  } else if (mode == "fresh_subsets") {
    train.partition_mode = tl::PartitionMode::kFreshSubsets;
    train.subset_count = cfg.get_int("subset_count", 10);
  } else {
    throw std::invalid_argument("partition_mode must be reuse_full or fresh_subsets");
  }
  train.validate();
  return train;
}

tl::OracleNetwork oracle_from(const tl::Config& cfg, std::uint64_t seed) {
  const std::string path = cfg.get_string("oracle_file", "");
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open oracle file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return tl::oracle_from_json(buf.str());
  }
  const int d = cfg.get_int("d", 100);
  const int K = cfg.get_int("K", 5);
  const int r = cfg.get_int("r", 20);
  tl::OracleNetwork oracle =
      tl::generate_oracle(d, K, std::vector<int>(K, r),
                          parse_overlap(cfg.get_string("overlap_mode", "almost_overlapped")),
                          tl::derive_seed(seed, 0xfeed));
  const double sigma = cfg.get_double("noise_sigma", 0.0);
  const double level = cfg.get_double("noise_level", -1.0);
  if (level >= 0.0) {
    const tl::SampleSet ref = tl::sample_dataset(oracle, 2000, tl::derive_seed(seed, 0xca1));
    oracle.noise_sigma = level * std::sqrt(ref.labels.squaredNorm() / ref.size());
  } else {
    oracle.noise_sigma = sigma;
  }
  return oracle;
}

const std::set<std::string> kCommonKeys = {
    "seed", "trials", "threads", "paper_scale", "eta",  "beta",
    "max_iters", "rel_change_tol", "partition_mode", "subset_count",
    "lambda", "success_tol", "d", "K", "N", "r", "overlap_mode",
    "noise_sigma", "noise_level", "oracle_file"};

std::set<std::string> with_keys(std::initializer_list<std::string> extra) {
  std::set<std::string> keys = kCommonKeys;
  keys.insert(extra.begin(), extra.end());
  return keys;
}

tl::GridBase grid_base_from(const tl::Config& cfg, int default_trials) {
  tl::GridBase base;
  base.trials_per_cell = cfg.get_int("trials", default_trials);
  base.master_seed = cfg.get_u64("seed", 1);
  base.threads = cfg.get_int("threads", 1);
  base.train = train_config_from(cfg);
  base.lambda = cfg.get_double("lambda", 0.1);
  base.success_tol = cfg.get_double("success_tol", 1e-4);
  return base;
}

std::string grid_trials_csv(const tl::GridResult& res) {
  tl::CsvBuilder csv({res.axis_a.name, res.axis_b.name, "trial", "seed", "success",
                      "final_rel_error", "iterations", "rate"});
  for (const tl::TrialRecord& t : res.trials) {
    csv.cell(res.axis_a.values[t.cell_a])
        .cell(res.axis_b.values[t.cell_b])
        .cell(t.trial)
        .cell(t.seed)
        .cell(static_cast<long>(t.success ? 1 : 0))
        .cell(t.final_rel_error)
        .cell(t.iterations)
        .cell(t.rate);
    csv.end_row();
  }
  return csv.str();
}

std::string grid_cells_csv(const tl::GridResult& res) {
  tl::CsvBuilder csv({res.axis_a.name, res.axis_b.name, "trials", "success_rate", "mean_err",
                      "std_err", "mean_rate", "mean_iters"});
  for (const tl::CellAggregate& c : res.cells) {
    csv.cell(res.axis_a.values[c.cell_a])
        .cell(res.axis_b.values[c.cell_b])
        .cell(c.trials)
        .cell(c.success_rate)
        .cell(c.mean_err)
        .cell(c.std_err)
        .cell(c.mean_rate)
        .cell(c.mean_iters);
    csv.end_row();
  }
  return csv.str();
}

// ---------------------------------------------------------------- commands

int cmd_gen_oracle(const CommonOpts& opts) {
  const tl::Config cfg = resolve_config(opts);
  cfg.reject_unknown_keys(kCommonKeys);
  const std::uint64_t seed = cfg.get_u64("seed", 1);
  const tl::OracleNetwork oracle = oracle_from(cfg, seed);
  const auto base = output_base(opts, "gen-oracle", cfg);
  ManifestWriter manifest("gen-oracle", cfg, seed);
  manifest.add(base.string() + "-oracle.json", tl::oracle_to_json(oracle));
  manifest.add(base.string() + "-mask.csv", tl::mask_to_csv(oracle.mask()));
  manifest.stat("r_tilde", tl::r_tilde(oracle.mask()));
  manifest.stat("pruning_ratio", tl::pruning_ratio(oracle.mask()));
  manifest.finish(base);
  return 0;
}

int cmd_train(const CommonOpts& opts) {
  const tl::Config cfg = resolve_config(opts);
  cfg.reject_unknown_keys(kCommonKeys);
  const std::uint64_t seed = cfg.get_u64("seed", 1);
  const tl::OracleNetwork oracle = oracle_from(cfg, seed);
  const int N = cfg.get_int("N", 5000);
  const double lambda = cfg.get_double("lambda", 0.1);
  tl::TrainConfig train = train_config_from(cfg);
  train.seed = tl::derive_seed(seed, 3);

  const tl::SampleSet data = tl::sample_dataset(oracle, N, tl::derive_seed(seed, 1));
  const tl::WeightMatrix w0 =
      tl::random_ball_init(oracle, lambda, oracle.mask(), tl::derive_seed(seed, 2));
  const tl::TrainTrace trace = tl::agd_train(data, oracle.mask(), w0, train, &oracle);

  tl::CsvBuilder csv({"iter", "rel_error", "risk", "rel_change"});
  for (const tl::TraceRecord& rec : trace.records) {
    csv.cell(rec.iter).cell(rec.rel_error).cell(rec.risk).cell(rec.rel_change);
    csv.end_row();
  }
  const auto base = output_base(opts, "train", cfg);
  ManifestWriter manifest("train", cfg, seed);
  manifest.add(base.string() + "-trace.csv", csv.str());
  manifest.stat("final_rel_error", trace.final_rel_error());
  manifest.stat("iterations", trace.iterations);
  manifest.stat("terminated_converged", trace.reason == tl::StopReason::kConverged ? 1.0 : 0.0);
  manifest.finish(base);
  std::cout << "final relative error: " << trace.final_rel_error() << " after "
            << trace.iterations << " iterations\n";
  return 0;
}

int cmd_probe_hessian(const CommonOpts& opts) {
  const tl::Config cfg = resolve_config(opts);
  cfg.reject_unknown_keys(with_keys({"probes", "probe_radius"}));
  const std::uint64_t seed = cfg.get_u64("seed", 1);
  const tl::OracleNetwork oracle = oracle_from(cfg, seed);
  const int N = cfg.get_int("N", 5000);
  const int probes = cfg.get_int("probes", 20);
  const double radius = cfg.get_double("probe_radius", 0.05);

  const tl::SampleSet data = tl::sample_dataset(oracle, N, tl::derive_seed(seed, 1));
  tl::CsvBuilder csv({"n_params", "r_tilde", "location_error", "lambda_min", "lambda_max",
                      "N", "seed"});
  const double rt = tl::r_tilde(oracle.mask());
  for (int p = 0; p < probes; ++p) {
    const std::uint64_t probe_seed = tl::derive_seed(seed, 2, p);
    const tl::WeightMatrix w =
        tl::random_ball_init(oracle, radius, oracle.mask(), probe_seed);
    const tl::HessianProbe probe = tl::hessian_probe(w, data, oracle.weights);
    csv.cell(probe.n_params)
        .cell(rt)
        .cell(probe.location_error)
        .cell(probe.lambda_min)
        .cell(probe.lambda_max)
        .cell(N)
        .cell(probe_seed);
    csv.end_row();
  }
  const auto base = output_base(opts, "probe-hessian", cfg);
  ManifestWriter manifest("probe-hessian", cfg, seed);
  manifest.add(base.string() + "-probes.csv", csv.str());
  manifest.finish(base);
  return 0;
}

int cmd_phase_radius(const CommonOpts& opts) {
  const tl::Config cfg = resolve_config(opts);
  cfg.reject_unknown_keys(
      with_keys({"r_tilde_list", "lambda_list", "boundary_threshold", "overlap_mode"}));
  const bool paper = cfg.get_string("paper_scale", "0") == "1";
  tl::PhaseSpec spec;
  spec.base = grid_base_from(cfg, paper ? 100 : 30);
  spec.d = cfg.get_int("d", paper ? 500 : 200);
  spec.K = cfg.get_int("K", 10);
  spec.N = cfg.get_int("N", paper ? 5000 : 2000);
  spec.r_tilde_targets =
      cfg.get_double_list("r_tilde_list", paper ? std::vector<double>{10, 20, 40, 80, 160}
                                                : std::vector<double>{10, 20, 40, 80});
  spec.lambdas = cfg.get_double_list(
      "lambda_list", paper ? std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8}
                           : std::vector<double>{0.1, 0.25, 0.4, 0.55, 0.7});
  spec.overlap_mode = parse_overlap(cfg.get_string("overlap_mode", "almost_overlapped"));

  const tl::GridResult res = tl::radius_phase_diagram(spec);
  const double threshold = cfg.get_double("boundary_threshold", 0.9);
  const std::vector<double> boundary = tl::boundary_lambda_star(res, threshold);

  tl::CsvBuilder bcsv({"r_tilde", "lambda_star"});
  std::vector<double> xs, ys;
  for (size_t i = 0; i < boundary.size(); ++i) {
    bcsv.cell(spec.r_tilde_targets[i]).cell(boundary[i]);
    bcsv.end_row();
    if (boundary[i] >= 0.0) {
      xs.push_back(std::sqrt(spec.r_tilde_targets[i]));
      ys.push_back(boundary[i]);
    }
  }
  const auto base = output_base(opts, "phase-radius", cfg);
  ManifestWriter manifest("phase-radius", cfg, spec.base.master_seed);
  manifest.add(base.string() + "-trials.csv", grid_trials_csv(res));
  manifest.add(base.string() + "-cells.csv", grid_cells_csv(res));
  manifest.add(base.string() + "-boundary.csv", bcsv.str());
  if (xs.size() >= 3) {
    const tl::LineFit fit = tl::fit_line(xs, ys);
    manifest.stat("boundary_fit_slope", fit.slope);
    manifest.stat("boundary_fit_r2", fit.r_squared);
  }
  manifest.finish(base);
  return 0;
}

int cmd_rate_sweep(const CommonOpts& opts) {
  const tl::Config cfg = resolve_config(opts);
  cfg.reject_unknown_keys(with_keys({"r_tilde_list", "beta_list", "rate_noise_floor"}));
  const bool paper = cfg.get_string("paper_scale", "0") == "1";
  tl::RateSpec spec;
  spec.base = grid_base_from(cfg, 20);
  spec.d = cfg.get_int("d", 300);
  spec.K = cfg.get_int("K", 10);
  spec.N = cfg.get_int("N", 5000);
  spec.r_tilde_targets =
      cfg.get_double_list("r_tilde_list", paper ? std::vector<double>{15, 30, 60, 120, 240}
                                                : std::vector<double>{15, 30, 60});
  spec.betas = cfg.get_double_list("beta_list", {0.0, cfg.get_double("beta", 0.2)});
  spec.rate_noise_floor = cfg.get_double("rate_noise_floor", 1e-3);

  const tl::GridResult res = tl::rate_sweep(spec);
  const auto base = output_base(opts, "rate-sweep", cfg);
  ManifestWriter manifest("rate-sweep", cfg, spec.base.master_seed);
  manifest.add(base.string() + "-trials.csv", grid_trials_csv(res));
  manifest.add(base.string() + "-cells.csv", grid_cells_csv(res));
  // rate against 1/sqrt(r~), per beta cell
  for (size_t b = 0; b < spec.betas.size(); ++b) {
    std::vector<double> xs, ys;
    for (const tl::CellAggregate& c : res.cells) {
      if (c.cell_b == static_cast<int>(b) && c.mean_rate >= 0.0) {
        xs.push_back(1.0 / std::sqrt(res.axis_a.values[c.cell_a]));
        ys.push_back(c.mean_rate);
      }
    }
    if (xs.size() >= 3) {
      const tl::LineFit fit = tl::fit_line(xs, ys);
      manifest.stat("rate_fit_r2_beta" + std::to_string(b), fit.r_squared);
      manifest.stat("rate_fit_slope_beta" + std::to_string(b), fit.slope);
    }
  }
  manifest.finish(base);
  return 0;
}

int cmd_sample_complexity(const CommonOpts& opts) {
  const tl::Config cfg = resolve_config(opts);
  cfg.reject_unknown_keys(
      with_keys({"N_list", "r_tilde_list", "threshold", "fixed_r_mode", "overlap_mode"}));
  const bool paper = cfg.get_string("paper_scale", "0") == "1";
  tl::SampleComplexitySpec spec;
  spec.base = grid_base_from(cfg, paper ? 100 : 30);
  spec.d = cfg.get_int("d", 100);
  spec.K = cfg.get_int("K", 10);
  spec.sample_sizes = cfg.get_double_list(
      "N_list", paper ? std::vector<double>{250, 500, 1000, 2000, 4000, 8000}
                      : std::vector<double>{250, 500, 1000, 2000, 4000});
  if (cfg.get_string("fixed_r_mode", "0") == "1") {
    spec.mode = tl::SparsityAxisMode::kOverlapPattern;
    spec.fixed_r = cfg.get_int("r", 20);
    spec.patterns = {tl::OverlapMode::kAlmostOverlapped, tl::OverlapMode::kRandom,
                     tl::OverlapMode::kDisjoint};
  } else {
    spec.r_tilde_targets = cfg.get_double_list(
        "r_tilde_list", paper ? std::vector<double>{10, 20, 30, 40, 60, 80}
                              : std::vector<double>{10, 20, 40, 60});
    spec.overlap_mode = parse_overlap(cfg.get_string("overlap_mode", "almost_overlapped"));
  }

  const tl::GridResult res = tl::sample_complexity_diagram(spec);
  const double threshold = cfg.get_double("threshold", 0.9);
  const std::vector<double> n_star = tl::threshold_sample_size(res, threshold);

  tl::CsvBuilder ncsv({res.axis_b.name, "n_star"});
  std::vector<double> xs, ys;
  for (size_t b = 0; b < n_star.size(); ++b) {
    ncsv.cell(res.axis_b.values[b]).cell(n_star[b]);
    ncsv.end_row();
    if (n_star[b] >= 0.0 && spec.mode == tl::SparsityAxisMode::kRTildeTarget) {
      xs.push_back(res.axis_b.values[b]);
      ys.push_back(n_star[b]);
    }
  }
  const auto base = output_base(opts, "sample-complexity", cfg);
  ManifestWriter manifest("sample-complexity", cfg, spec.base.master_seed);
  manifest.add(base.string() + "-trials.csv", grid_trials_csv(res));
  manifest.add(base.string() + "-cells.csv", grid_cells_csv(res));
  manifest.add(base.string() + "-threshold.csv", ncsv.str());
  if (xs.size() >= 3) {
    const tl::LineFit fit = tl::fit_line(xs, ys);
    manifest.stat("n_star_fit_slope", fit.slope);
    manifest.stat("n_star_fit_r2", fit.r_squared);
  }
  manifest.finish(base);
  return 0;
}

int cmd_noise_sweep(const CommonOpts& opts) {
  const tl::Config cfg = resolve_config(opts);
  cfg.reject_unknown_keys(with_keys({"r_tilde_list", "noise_list"}));
  const bool paper = cfg.get_string("paper_scale", "0") == "1";
  tl::NoiseSpec spec;
  spec.base = grid_base_from(cfg, paper ? 100 : 30);
  spec.d = cfg.get_int("d", 300);
  spec.K = cfg.get_int("K", 10);
  spec.N = cfg.get_int("N", 1000);
  spec.r_tilde_targets = cfg.get_double_list(
      "r_tilde_list", paper ? std::vector<double>{10, 20, 40, 80, 160}
                            : std::vector<double>{10, 20, 40, 80});
  spec.noise_levels = cfg.get_double_list("noise_list", {0.001, 0.01, 0.02});

  const tl::GridResult res = tl::noise_sweep(spec);
  const auto base = output_base(opts, "noise-sweep", cfg);
  ManifestWriter manifest("noise-sweep", cfg, spec.base.master_seed);
  manifest.add(base.string() + "-trials.csv", grid_trials_csv(res));
  manifest.add(base.string() + "-cells.csv", grid_cells_csv(res));
  for (size_t b = 0; b < spec.noise_levels.size(); ++b) {
    std::vector<double> xs, ys;
    for (const tl::CellAggregate& c : res.cells) {
      if (c.cell_b == static_cast<int>(b)) {
        xs.push_back(std::sqrt(res.axis_a.values[c.cell_a]));
        ys.push_back(c.mean_err);
      }
    }
    if (xs.size() >= 3) {
      const tl::LineFit fit = tl::fit_line(xs, ys);
      manifest.stat("err_fit_r2_noise" + std::to_string(b), fit.r_squared);
    }
  }
  manifest.finish(base);
  return 0;
}

int cmd_grasp_sweep(const CommonOpts& opts) {
  const tl::Config cfg = resolve_config(opts);
  cfg.reject_unknown_keys(with_keys({"ratio_list", "N_list", "warmup_iters", "test_samples",
                                     "iteration_test_threshold", "monitor_stride", "mask_source",
                                     "accuracy_lo", "accuracy_hi"}));
  const bool paper = cfg.get_string("paper_scale", "0") == "1";
  tl::InaccurateMaskSpec spec;
  spec.base = grid_base_from(cfg, paper ? 1000 : 100);
  spec.d = cfg.get_int("d", 100);
  spec.K = cfg.get_int("K", 5);
  spec.oracle_r = cfg.get_int("r", 20);
  spec.pruning_ratios = cfg.get_double_list("ratio_list", {50, 65, 80});
  {
    const auto ns = cfg.get_double_list("N_list", {200});
    spec.sample_sizes.assign(ns.begin(), ns.end());
  }
  {
    const std::string source = cfg.get_string("mask_source", "grasp");
    if (source == "grasp") {
      spec.mask_source = tl::MaskSource::kGrasp;
    } else if (source == "controlled") {
      spec.mask_source = tl::MaskSource::kControlled;
    } else {
      throw std::invalid_argument("mask_source must be 'grasp' or 'controlled'");
    }
  }
  spec.controlled_accuracy_lo = cfg.get_double("accuracy_lo", 0.8);
  spec.controlled_accuracy_hi = cfg.get_double("accuracy_hi", 1.0);
  spec.warmup_iters = cfg.get_int("warmup_iters", 20);
  spec.test_samples = cfg.get_int("test_samples", paper ? 100000 : 20000);
  spec.iteration_test_threshold = cfg.get_double("iteration_test_threshold", 1e-2);
  spec.monitor_stride = cfg.get_int("monitor_stride", 10);

  const tl::InaccurateMaskResult res = tl::inaccurate_mask_sweep(spec);

  tl::CsvBuilder tcsv({"pruning_ratio", "N", "trial", "seed", "mask_accuracy", "test_error",
                       "iterations", "iters_to_threshold"});
  for (const tl::MaskTrialRecord& t : res.trials) {
    tcsv.cell(t.pruning_ratio)
        .cell(t.sample_size)
        .cell(t.trial)
        .cell(t.seed)
        .cell(t.mask_accuracy)
        .cell(t.test_error)
        .cell(t.iterations)
        .cell(t.iters_to_threshold);
    tcsv.end_row();
  }
  tl::CsvBuilder bcsv({"ratio", "N", "accuracy_bucket_lo", "trials", "mean_test_error",
                       "mean_iters_to_threshold"});
  for (const tl::MaskBucketAggregate& b : res.buckets) {
    bcsv.cell(spec.pruning_ratios[b.ratio_index])
        .cell(spec.sample_sizes[b.n_index])
        .cell(b.bucket_lo)
        .cell(b.trials)
        .cell(b.mean_test_error)
        .cell(b.mean_iters_to_threshold);
    bcsv.end_row();
  }
  const auto base = output_base(opts, "grasp-sweep", cfg);
  ManifestWriter manifest("grasp-sweep", cfg, spec.base.master_seed);
  manifest.add(base.string() + "-trials.csv", tcsv.str());
  manifest.add(base.string() + "-buckets.csv", bcsv.str());
  manifest.finish(base);
  return 0;
}

int cmd_imp_sweep(const CommonOpts& opts) {
  const tl::Config cfg = resolve_config(opts);
  cfg.reject_unknown_keys(
      with_keys({"N_list", "rounds", "per_round_fraction", "rewind", "test_samples"}));
  const bool paper = cfg.get_string("paper_scale", "0") == "1";
  tl::ImpSweepSpec spec;
  spec.base = grid_base_from(cfg, paper ? 30 : 8);
  spec.d = cfg.get_int("d", 100);
  spec.K = cfg.get_int("K", 5);
  spec.oracle_r = cfg.get_int("r", 20);
  spec.noise_level_target = cfg.get_double("noise_level", 1e-3);
  {
    const auto ns = cfg.get_double_list("N_list", {100, 200, 500, 1000});
    spec.sample_sizes.assign(ns.begin(), ns.end());
  }
  spec.schedule.rounds = cfg.get_int("rounds", 10);
  spec.schedule.per_round_fraction = cfg.get_double("per_round_fraction", 0.2);
  spec.schedule.rewind = cfg.get_string("rewind", "to_init") == "none"
                             ? tl::RewindMode::kNone
                             : tl::RewindMode::kToInit;
  spec.test_samples = cfg.get_int("test_samples", paper ? 100000 : 20000);

  const tl::ImpSweepResult res = tl::imp_sweep(spec);
  tl::CsvBuilder csv({"N", "round", "mean_pruning_ratio", "mean_test_error", "trials"});
  for (const tl::ImpCell& c : res.cells) {
    csv.cell(spec.sample_sizes[c.n_index])
        .cell(c.round)
        .cell(c.mean_pruning_ratio)
        .cell(c.mean_test_error)
        .cell(c.trials);
    csv.end_row();
  }
  const auto base = output_base(opts, "imp-sweep", cfg);
  ManifestWriter manifest("imp-sweep", cfg, spec.base.master_seed);
  manifest.add(base.string() + "-cells.csv", csv.str());
  manifest.finish(base);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked one-hidden-layer ReLU learning and pruning experiments"};
  app.require_subcommand(1);

  std::map<std::string, std::pair<CommonOpts, int (*)(const CommonOpts&)>> commands;
  const std::vector<std::pair<std::string, int (*)(const CommonOpts&)>> table = {
      {"gen-oracle", cmd_gen_oracle},       {"train", cmd_train},
      {"probe-hessian", cmd_probe_hessian}, {"phase-radius", cmd_phase_radius},
      {"rate-sweep", cmd_rate_sweep},       {"sample-complexity", cmd_sample_complexity},
      {"noise-sweep", cmd_noise_sweep},     {"grasp-sweep", cmd_grasp_sweep},
      {"imp-sweep", cmd_imp_sweep}};
  for (const auto& [name, fn] : table) {
    auto& slot = commands[name];
    slot.second = fn;
    add_common(app.add_subcommand(name), slot.first);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (auto& [name, slot] : commands) {
      if (app.get_subcommand(name)->parsed()) return slot.second(slot.first);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
