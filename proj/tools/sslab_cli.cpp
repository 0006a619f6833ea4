#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "sslab/diagnostics.hpp"
#include "sslab/error.hpp"
#include "sslab/gibbs.hpp"
#include "sslab/io.hpp"
#include "sslab/logistic.hpp"
#include "sslab/random_design.hpp"
#include "sslab/sloc.hpp"
#include "sslab/statgen.hpp"

using namespace sslab;

namespace {

struct Common {
  std::string config_path;
  std::string data_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

const std::set<std::string> kKnownKeys = {
    "seed",
    "data.n", "data.p", "data.k", "data.signal_scale", "data.design", "data.rho", "data.pairs",
    "data.support", "data.signs", "data.normalize", "data.sigma",
    "prior.mode", "prior.q", "prior.tau0", "prior.tau1", "prior.sigma", "prior.delta",
    "init.mode", "init.lambda",
    "gibbs.sweeps", "gibbs.burn_in", "gibbs.thin", "gibbs.lazy", "gibbs.blocked_z",
    "gibbs.z_block_pmax", "gibbs.random_scan", "gibbs.max_flips", "gibbs.rebuild_every",
    "gibbs.solver", "gibbs.cg_tol",
    "sloc.horizon", "sloc.step", "sloc.paths", "sloc.full_set", "sloc.lambda", "sloc.max_extra",
    "sloc.top_m", "sloc.base", "sloc.check_convex", "sloc.trace", "sloc.trace_every",
    "rd.gamma", "rd.inner_steps", "rd.mc_samples",
    "oracle.p_max",
    "design.k", "design.c", "design.pool",
    "bench.sweeps", "bench.sloc_steps", "bench.max_extra",
};

Config load_config(const Common& c) {
  Config cfg = c.config_path.empty() ? Config() : Config::load(c.config_path);
  if (c.seed) cfg.set("seed", std::to_string(*c.seed));
  cfg.require_known(kKnownKeys);
  return cfg;
}

// Independent seeds per module from the single experiment seed.
std::uint64_t module_seed(const Config& cfg, std::uint64_t tag) {
  return splitmix64(cfg.get_u64("seed", 1) ^ splitmix64(tag));
}

std::ofstream open_out(const std::string& path) {
  if (path.empty()) throw ConfigError("--out is required");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw ConfigError("bad integer list '" + s + "'");
    }
  }
  return out;
}

SyntheticSpec read_spec(const Config& cfg) {
  SyntheticSpec s;
  s.n = static_cast<int>(cfg.get_long("data.n", s.n));
  s.p = static_cast<int>(cfg.get_long("data.p", s.p));
  s.k = static_cast<int>(cfg.get_long("data.k", s.k));
  s.signal_scale = cfg.get_double("data.signal_scale", s.signal_scale);
  const auto design = cfg.get_string("data.design", "gaussian");
  if (design == "gaussian") {
    s.design = DesignKind::kGaussianIid;
  } else if (design == "orthogonal") {
    s.design = DesignKind::kOrthogonal;
  } else if (design == "correlated") {
    s.design = DesignKind::kCorrelated;
  } else {
    throw ConfigError("data.design must be gaussian, orthogonal or correlated");
  }
  s.rho = cfg.get_double("data.rho", s.rho);
  const auto pairs = parse_int_list(cfg.get_string("data.pairs", ""));
  if (pairs.size() % 2 != 0) throw ConfigError("data.pairs needs an even count of indices");
  for (std::size_t i = 0; i < pairs.size(); i += 2) s.pairs.emplace_back(pairs[i], pairs[i + 1]);
  s.support = parse_int_list(cfg.get_string("data.support", ""));
  for (int v : parse_int_list(cfg.get_string("data.signs", ""))) s.signs.push_back(v);
  s.normalize_columns = cfg.get_bool("data.normalize", true);
  s.sigma = cfg.get_double("data.sigma", s.sigma);
  s.seed = module_seed(cfg, 1);
  return s;
}

Prior read_prior(const Config& cfg, const Dataset& data) {
  const auto mode = cfg.get_string("prior.mode", "suggest");
  const double sigma = cfg.get_double("prior.sigma", data.sigma_hint);
  const double delta = cfg.get_double("prior.delta", 1.0);
  if (mode == "suggest") return suggest_prior(data.n(), data.p(), sigma, delta);
  if (mode == "explicit")
    return Prior(cfg.get_double("prior.q", 0.5), cfg.get_double("prior.tau0", 0.1),
                 cfg.get_double("prior.tau1", 1.0), sigma, delta);
  throw ConfigError("prior.mode must be suggest or explicit");
}

GibbsConfig read_gibbs(const Config& cfg) {
  GibbsConfig g;
  g.sweeps = cfg.get_long("gibbs.sweeps", g.sweeps);
  g.burn_in = cfg.get_long("gibbs.burn_in", g.burn_in);
  g.thin = cfg.get_long("gibbs.thin", g.thin);
  g.lazy = cfg.get_bool("gibbs.lazy", g.lazy);
  g.blocked_z = cfg.get_bool("gibbs.blocked_z", g.blocked_z);
  g.z_block_pmax = static_cast<int>(cfg.get_long("gibbs.z_block_pmax", g.z_block_pmax));
  g.random_scan = cfg.get_bool("gibbs.random_scan", g.random_scan);
  g.cache.max_flips = static_cast<int>(cfg.get_long("gibbs.max_flips", g.cache.max_flips));
  g.cache.rebuild_every = static_cast<int>(cfg.get_long("gibbs.rebuild_every", g.cache.rebuild_every));
  const auto solver = cfg.get_string("gibbs.solver", "cached");
  if (solver == "cached") {
    g.gaussian.solver = GaussianSolver::kCachedInverse;
  } else if (solver == "cg") {
    g.gaussian.solver = GaussianSolver::kConjugateGradient;
  } else {
    throw ConfigError("gibbs.solver must be cached or cg");
  }
  g.gaussian.cg_tol = cfg.get_double("gibbs.cg_tol", g.gaussian.cg_tol);
  g.seed = module_seed(cfg, 2);
  g.validate();
  return g;
}

JointState read_init(const Config& cfg, const Dataset& data, const Prior& prior) {
  const auto mode = cfg.get_string("init.mode", "lasso");
  const int p = data.p();
  if (mode == "empty") return {Eigen::VectorXd::Zero(p), ModelIndicator(p)};
  if (mode == "truth") {
    if (!data.truth) throw ConfigError("init.mode=truth needs a truth sidecar");
    return {data.truth->beta_star, data.truth->z_star};
  }
  if (mode == "lasso") {
    WarmStartOptions o;
    o.lambda = cfg.get_double("init.lambda", -1.0);
    return warm_start(data, prior, o).state;
  }
  throw ConfigError("init.mode must be empty, truth or lasso");
}

int cmd_generate(const Common& c) {
  const Config cfg = load_config(c);
  const auto spec = read_spec(cfg);
  const auto data = gen_synthetic(spec);
  save_dataset(c.out_path, data, cfg.hash());
  std::cout << "wrote " << c.out_path << " (n=" << data.n() << ", p=" << data.p() << ")\n";
  return 0;
}

int cmd_gibbs(const Common& c) {
  const Config cfg = load_config(c);
  const auto data = load_dataset(c.data_path);
  const auto prior = read_prior(cfg, data);
  const auto g = read_gibbs(cfg);
  const auto init = read_init(cfg, data, prior);
  auto out = open_out(c.out_path);
  SampleWriter writer(out, data.p(), cfg.hash());
  const auto meta = gibbs_run(data, prior, g, init, [&](const Sample& s) { writer.write(s); });
  std::cout << "sweeps=" << meta.steps << " rebuilds=" << meta.cache_rebuilds
            << " low_rank_updates=" << meta.low_rank_updates << " lazy_holds=" << meta.lazy_holds
            << (meta.blocked_fallback ? " blocked_fallback=1" : "") << " seconds=" << meta.wall_seconds << "\n";
  return 0;
}

WarmStartSet read_sloc_set(const Config& cfg, const Dataset& data, const Prior& prior) {
  if (cfg.get_bool("sloc.full_set", false)) return full_model_set(data.p());
  WarmStartOptions o;
  o.lambda = cfg.get_double("sloc.lambda", -1.0);
  o.max_extra = static_cast<int>(cfg.get_long("sloc.max_extra", 2));
  o.top_m = static_cast<int>(cfg.get_long("sloc.top_m", 0));
  o.use_truth = cfg.get_string("sloc.base", "lasso") == "truth";
  return warm_start(data, prior, o).set;
}

int cmd_sloc(const Common& c) {
  const Config cfg = load_config(c);
  const auto data = load_dataset(c.data_path);
  const auto prior = read_prior(cfg, data);
  SlocConfig sc;
  sc.horizon = cfg.get_double("sloc.horizon", sc.horizon);
  sc.step = cfg.get_double("sloc.step", sc.step);
  sc.mc_paths = static_cast<int>(cfg.get_long("sloc.paths", sc.mc_paths));
  sc.seed = module_seed(cfg, 3);
  sc.jobs = c.jobs;
  SlocOptions opt;
  opt.check_convex = cfg.get_bool("sloc.check_convex", false);
  const auto trace_path = cfg.get_string("sloc.trace", "");
  opt.trace = !trace_path.empty();
  opt.trace_every = cfg.get_long("sloc.trace_every", opt.trace_every);
  const auto S = read_sloc_set(cfg, data, prior);
  auto out = open_out(c.out_path);
  const auto res = sl_run(data, prior, S, sc, opt);
  write_matrix_csv(out, res.outputs, "x_", cfg.hash(), "path");
  if (opt.trace) {
    std::ofstream tr(trace_path);
    if (!tr) throw ConfigError("cannot write " + trace_path);
    tr << "# config_hash=" << cfg.hash() << "\npath,t,drift_norm,top_model,top_weight\n";
    for (const auto& r : res.trace)
      tr << r.path << ',' << format_double(r.t) << ',' << format_double(r.drift_norm) << ','
         << S.models[r.top_model].to_string() << ',' << format_double(r.top_weight) << '\n';
  }
  std::cout << "paths=" << sc.mc_paths << " models=" << S.models.size() << " seconds=" << res.wall_seconds << "\n";
  return 0;
}

int cmd_rd_gibbs(const Common& c) {
  const Config cfg = load_config(c);
  const auto data = load_dataset(c.data_path);
  const auto prior = read_prior(cfg, data);
  RdGibbsConfig rc;
  rc.gibbs = read_gibbs(cfg);
  rc.inner_steps = static_cast<int>(cfg.get_long("rd.inner_steps", rc.inner_steps));
  rc.mc_samples = static_cast<int>(cfg.get_long("rd.mc_samples", rc.mc_samples));
  const RdTarget target(data.y, prior, cfg.get_double("rd.gamma", 0.0));
  auto out = open_out(c.out_path);
  SampleWriter writer(out, data.p(), cfg.hash());
  const JointState init{Eigen::VectorXd::Zero(data.p()), ModelIndicator(data.p())};
  const auto meta = rd_gibbs_run(target, rc, init, [&](const Sample& s) { writer.write(s); });
  std::cout << "sweeps=" << meta.steps << " seconds=" << meta.wall_seconds << "\n";
  return 0;
}

int cmd_logistic(const Common& c) {
  const Config cfg = load_config(c);
  const auto data = load_dataset(c.data_path);
  const auto prior = read_prior(cfg, data);
  const auto g = read_gibbs(cfg);
  validate_binary_labels(data);
  auto out = open_out(c.out_path);
  SampleWriter writer(out, data.p(), cfg.hash());
  const auto samples = logistic_run(data, prior, g, logistic_initial_state(data, ModelIndicator(data.p())));
  for (const auto& s : samples) writer.write({s.sweep, {s.state.beta, s.state.z}, s.log_density});
  std::cout << "samples=" << samples.size() << "\n";
  return 0;
}

int cmd_oracle(const Common& c) {
  const Config cfg = load_config(c);
  const auto data = load_dataset(c.data_path);
  const auto prior = read_prior(cfg, data);
  const int pmax = static_cast<int>(cfg.get_long("oracle.p_max", kDefaultEnumerationLimit));
  const auto table = enumerate_posterior(data, prior, pmax);
  auto out = open_out(c.out_path);
  write_table(out, table, cfg.hash());
  std::cout << "models=" << table.size() << "\n";
  return 0;
}

int cmd_diagnose(const Common& c, const std::string& samples_path, const std::string& table_path,
                 std::optional<double> threshold) {
  std::ifstream tin(table_path);
  if (!tin) throw ConfigError("cannot open table " + table_path);
  const auto table = read_table(tin);
  std::ifstream sin(samples_path);
  if (!sin) throw ConfigError("cannot open samples " + samples_path);
  std::string first;
  while (std::getline(sin, first) && (first.empty() || first[0] == '#')) {}
  sin.clear();
  sin.seekg(0);
  std::vector<ModelIndicator> zs;
  if (first.rfind("sweep,z", 0) == 0) {
    for (auto& r : read_samples(sin)) zs.push_back(std::move(r.z));
  } else {
    const auto m = read_matrix_csv(sin);
    if (!threshold) {
      if (c.data_path.empty() || c.config_path.empty())
        throw ConfigError("diagnose: localization outputs need --threshold or --config with --data");
      const Config cfg = load_config(c);
      const auto data = load_dataset(c.data_path);
      threshold = spike_slab_crossover(read_prior(cfg, data));
    }
    zs = threshold_models(m, *threshold);
  }
  if (zs.empty()) throw ConfigError("diagnose: no samples");
  if (zs.front().size() != table.p()) throw DimensionError("diagnose: sample and table dimensions differ");
  const double tv = z_tv(zs, table);
  const Eigen::VectorXd inc = inclusion_probs(zs);
  const Eigen::VectorXd ref = table.inclusion_probs();
  std::cout << std::setprecision(6) << "samples=" << zs.size() << "\ntv=" << tv << "\n";
  if (threshold) std::cout << "threshold=" << *threshold << "\n";
  std::cout << "coordinate,inclusion_sample,inclusion_table\n";
  for (int j = 0; j < table.p(); ++j) std::cout << j << ',' << inc[j] << ',' << ref[j] << '\n';
  std::cout << "max_inclusion_error=" << (inc - ref).cwiseAbs().maxCoeff() << "\n";
  return 0;
}

int cmd_design_stats(const Common& c) {
  const Config cfg = load_config(c);
  const auto data = load_dataset(c.data_path);
  const auto prior = read_prior(cfg, data);
  const int k = static_cast<int>(cfg.get_long("design.k", 2));
  const double bmin_c = cfg.get_double("design.c", 2.0);
  const auto pool_mode = cfg.get_string("design.pool", data.p() <= 12 ? "exhaustive" : "lasso");
  std::vector<ModelIndicator> pool;
  if (pool_mode == "exhaustive") {
    pool = all_supports_up_to(data.p(), k);
  } else if (pool_mode == "lasso") {
    WarmStartOptions o;
    o.max_extra = k;
    o.top_m = 2 * k;
    const auto ws = warm_start(data, prior, o);
    std::vector<int> cand = ws.pool;
    for (int j : ws.state.z.active_indices()) cand.push_back(j);
    pool = make_warm_start_set(ModelIndicator(data.p()), cand, k).models;
  } else {
    throw ConfigError("design.pool must be exhaustive or lasso");
  }
  const auto coh = coherence(data, prior, k, pool);
  const auto re = restricted_eig(data, prior, k, pool);
  std::cout << std::setprecision(8) << "k=" << k << " pool_size=" << pool.size() << "\n"
            << "coherence=" << coh.value << " exhaustive=" << coh.exhaustive << "\n"
            << "restricted_eig=" << re.value << " exhaustive=" << re.exhaustive << "\n";
  if (data.truth) {
    const auto bm = beta_min_check(data, prior, bmin_c);
    std::cout << "beta_min=" << (bm.pass ? "pass" : "fail") << " margin=" << bm.margin << " c=" << bm.c
              << " threshold=" << bm.threshold << "\n";
  }
  return 0;
}

int cmd_bench(const Common& c) {
  const Config cfg = load_config(c);
  const auto data = load_dataset(c.data_path);
  const auto prior = read_prior(cfg, data);
  const long sweeps = cfg.get_long("bench.sweeps", 200);
  const long sl_steps = cfg.get_long("bench.sloc_steps", 1000);
  const int max_extra = static_cast<int>(cfg.get_long("bench.max_extra", 2));
  const auto ws = [&] {
    WarmStartOptions o;
    o.max_extra = max_extra;
    o.use_truth = data.truth.has_value();
    return warm_start(data, prior, o);
  }();
  std::cout << "sampler,setting,steps,seconds,seconds_per_step\n";
  for (auto solver : {GaussianSolver::kCachedInverse, GaussianSolver::kConjugateGradient}) {
    GibbsConfig g;
    g.sweeps = sweeps;
    g.burn_in = 0;
    g.seed = module_seed(cfg, 2);
    g.gaussian.solver = solver;
    const auto meta = gibbs_run(data, prior, g, ws.state, [](const Sample&) {});
    std::cout << "gibbs," << (solver == GaussianSolver::kCachedInverse ? "cached" : "cg") << ',' << sweeps
              << ',' << meta.wall_seconds << ',' << meta.wall_seconds / static_cast<double>(sweeps) << '\n';
  }
  SlocConfig sc;
  sc.step = 0.01;
  sc.horizon = static_cast<double>(sl_steps) * sc.step;
  sc.mc_paths = 1;
  sc.seed = module_seed(cfg, 3);
  const auto res = sl_run(data, prior, ws.set, sc);
  std::cout << "sloc,|S|=" << ws.set.models.size() << ',' << sl_steps << ',' << res.wall_seconds << ','
            << res.wall_seconds / static_cast<double>(sl_steps) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spike-and-slab samplers: Gibbs, stochastic localization, random design, logistic"};
  app.require_subcommand(1);
  Common common;
  std::string samples_path, table_path;
  double threshold_value = 0.0;

  auto add_common = [&](CLI::App* sub, bool needs_data, bool needs_out) {
    sub->add_option("-c,--config", common.config_path, "key=value config file");
    auto* d = sub->add_option("-d,--data", common.data_path, "dataset file");
    if (needs_data) d->required();
    auto* o = sub->add_option("-o,--out", common.out_path, "output file");
    if (needs_out) o->required();
    sub->add_option("--seed", common.seed, "experiment seed (overrides config)");
    sub->add_option("-j,--jobs", common.jobs, "worker threads")->check(CLI::PositiveNumber);
  };
  auto* gen = app.add_subcommand("generate", "synthetic dataset from [data]");
  add_common(gen, false, true);
  auto* gibbs = app.add_subcommand("gibbs", "fixed-design Gibbs sampler");
  add_common(gibbs, true, true);
  auto* sloc = app.add_subcommand("sloc", "stochastic localization sampler");
  add_common(sloc, true, true);
  auto* rd = app.add_subcommand("rd-gibbs", "random-design Gibbs sampler");
  add_common(rd, true, true);
  auto* logit = app.add_subcommand("logistic", "Polya-Gamma logistic Gibbs sampler");
  add_common(logit, true, true);
  auto* oracle = app.add_subcommand("oracle", "exact posterior over all models");
  add_common(oracle, true, true);
  auto* diag = app.add_subcommand("diagnose", "compare samples with a posterior table");
  add_common(diag, false, false);
  diag->add_option("--samples", samples_path, "sample or output CSV")->required();
  diag->add_option("--table", table_path, "posterior table CSV")->required();
  auto* thr = diag->add_option("--threshold", threshold_value, "inclusion threshold for localization outputs");
  auto* design = app.add_subcommand("design-stats", "coherence, restricted eigenvalue, beta-min");
  add_common(design, true, false);
  auto* bench = app.add_subcommand("bench", "per-step cost table");
  add_common(bench, true, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(common);
    if (gibbs->parsed()) return cmd_gibbs(common);
    if (sloc->parsed()) return cmd_sloc(common);
    if (rd->parsed()) return cmd_rd_gibbs(common);
    if (logit->parsed()) return cmd_logistic(common);
    if (oracle->parsed()) return cmd_oracle(common);
    if (diag->parsed())
      return cmd_diagnose(common, samples_path, table_path,
                          thr->count() ? std::optional<double>(threshold_value) : std::nullopt);
    if (design->parsed()) return cmd_design_stats(common);
    if (bench->parsed()) return cmd_bench(common);
  } catch (const GuardError& e) {
    std::cerr << "guard violation: " << e.what() << "\n";
    return 4;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
