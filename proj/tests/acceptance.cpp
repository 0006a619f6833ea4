// Acceptance suite: one PASS/FAIL line per criterion. Optional arguments
// select criteria by number.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sslab/diagnostics.hpp"
#include "sslab/gibbs.hpp"
#include "sslab/linalg.hpp"
#include "sslab/logistic.hpp"
#include "sslab/random_design.hpp"
#include "sslab/sloc.hpp"
#include "sslab/statgen.hpp"

using namespace sslab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Shared small instance of criteria 1 and 2.
Dataset small_instance() {
  SyntheticSpec s;
  s.n = 20;
  s.p = 8;
  s.k = 2;
  s.signal_scale = 6.0;
  s.seed = 11;
  return gen_synthetic(s);
}

Outcome criterion1() {
  const auto data = small_instance();
  const auto prior = suggest_prior(20, 8, 1.0, 1.0);
  const auto table = enumerate_posterior(data, prior);
  GibbsConfig g;
  g.sweeps = 200000;
  g.burn_in = 20000;
  g.seed = 101;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<ModelIndicator> zs;
  zs.reserve(static_cast<std::size_t>(g.emitted_count()));
  gibbs_run(data, prior, g, {data.truth->beta_star, data.truth->z_star},
            [&](const Sample& s) { zs.push_back(s.state.z); });
  const double secs = seconds_since(t0);
  const double tv = z_tv(zs, table);
  return {tv <= 0.05 && secs <= 120.0, fmt("TV=%.4f (<= 0.05), %.1fs (<= 120s)", tv, secs)};
}

Outcome criterion2() {
  const auto data = small_instance();
  const auto prior = suggest_prior(20, 8, 1.0, 1.0);
  const auto table = enumerate_posterior(data, prior);
  std::vector<int> all(8);
  for (int j = 0; j < 8; ++j) all[j] = j;
  const auto S = make_warm_start_set(data.truth->z_star, all, 2);
  SlocConfig c;
  c.horizon = 64.0;
  c.step = 0.01;
  c.mc_paths = 5000;
  c.seed = 202;
  const auto res = sl_run(data, prior, S, c);
  const auto zs = threshold_models(res.outputs, spike_slab_crossover(prior));
  const double inc_err = (inclusion_probs(zs) - table.inclusion_probs()).cwiseAbs().maxCoeff();
  const double tv = z_tv(zs, table);
  const bool pass = inc_err <= 0.05 && tv <= 0.08 && res.wall_seconds <= 300.0;
  return {pass, fmt("|S|=%zu, max inclusion error=%.4f (<= 0.05), thresholded TV=%.4f (<= 0.08), %.1fs (<= 300s)",
                    S.models.size(), inc_err, tv, res.wall_seconds)};
}

Outcome criterion3() {
  Rng rng(303);
  const int n = 4;
  Eigen::MatrixXd X(n, 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 2; ++j) X(i, j) = rng.normal();
  Eigen::VectorXd y = X * Eigen::Vector2d(1.2, 0.0) + 0.5 * rng.normal_vector(n);
  const Prior prior(0.3, 0.2, 2.0, 0.7);
  const Dataset data(X, y);
  const auto S = full_model_set(2);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    LocalizationState st;
    st.t = std::exp(std::log(1e-2) + rng.uniform() * std::log(1e4));
    st.theta = st.t * Eigen::Vector2d(rng.normal(), rng.normal()) + std::sqrt(st.t) * rng.normal_vector(2);
    const Eigen::VectorXd a = sl_drift(st, S, data, prior);
    const Eigen::VectorXd ref = oracle::tilted_mean_quadrature(st.theta, st.t, X, y, prior);
    worst = std::max(worst, (a - ref).cwiseAbs().maxCoeff() / std::max(1.0, ref.cwiseAbs().maxCoeff()));
  }
  return {worst <= 1e-6, fmt("max error over 50 states=%.3e (<= 1e-6)", worst)};
}

Outcome criterion4() {
  bool pass = true;
  double worst_z = 0.0, worst_cov = 0.0;
  for (int inst = 0; inst < 5; ++inst) {
    Rng gen(400 + inst);
    const int n = 25 + 5 * inst, p = 6;
    Eigen::MatrixXd X(n, p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) X(i, j) = gen.normal();
    Eigen::VectorXd y = gen.normal_vector(n) * 1.5 + X.col(0);
    const Dataset data(X, y);
    const Prior prior(0.4, 0.1, 0.8 + 0.3 * inst, 1.0 + 0.2 * inst);
    ModelIndicator z(p);
    for (int j = 0; j <= 2 + inst % 3; ++j) z.set(j, true);
    ModelIndicator start = z;
    start.flip(0);
    start.flip(5);
    LowRankCache cache(data, prior);
    cache.rebuild(start);  // first draw goes through the low-rank path

    const auto act = z.active_indices();
    const Eigen::MatrixXd Xz = select_columns(X, act);
    const auto k = static_cast<Eigen::Index>(act.size());
    Eigen::MatrixXd Sigma = Xz.transpose() * Xz;
    Sigma.diagonal().array() += prior.sigma * prior.sigma / (prior.tau1 * prior.tau1);
    const Eigen::MatrixXd cov = prior.sigma * prior.sigma * Sigma.inverse();
    const Eigen::VectorXd mean = Sigma.ldlt().solve(Xz.transpose() * y);

    Rng rng(450 + inst);
    const int N = 200000;
    Eigen::MatrixXd draws(N, k);
    for (int d = 0; d < N; ++d) draws.row(d) = sample_active_gaussian(z, data, prior, cache, rng).transpose();
    const auto mc = sample_mean_cov(draws);
    for (Eigen::Index j = 0; j < k; ++j)
      worst_z = std::max(worst_z, std::abs(mc.mean[j] - mean[j]) / std::sqrt(cov(j, j) / N));
    const double rel = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(mc.cov - cov).eigenvalues().cwiseAbs().maxCoeff() /
                       Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov).eigenvalues().maxCoeff();
    worst_cov = std::max(worst_cov, rel);
  }
  pass = worst_z <= 4.0 && worst_cov <= 0.05;
  return {pass, fmt("max mean z-score=%.2f (<= 4), max operator-relative covariance error=%.4f (<= 0.05)",
                    worst_z, worst_cov)};
}

// Slab-only Gaussian instance of criteria 5 and 6.
struct SlabOnly {
  Dataset data;
  Prior prior;
  WarmStartSet S;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

SlabOnly slab_only_instance() {
  Rng rng(505);
  const int n = 20, p = 4;
  Eigen::MatrixXd X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
  Eigen::VectorXd y = X * Eigen::Vector4d(1.0, -0.5, 0.0, 0.3) + rng.normal_vector(n);
  SlabOnly s{Dataset(X, y), Prior(0.5, 0.1, 1.0, 1.0), {}, {}, {}};
  s.S.models = {ModelIndicator::all(p)};
  s.S.base = ModelIndicator::all(p);
  oracle::slab_gaussian(X, y, s.prior.sigma, s.prior.tau1, s.mean, s.cov);
  return s;
}

Outcome criterion5() {
  const auto inst = slab_only_instance();
  const double sqrt_p = 2.0;
  std::vector<double> w;
  std::string detail;
  for (double T : {4.0, 16.0, 64.0}) {
    SlocConfig c;
    c.horizon = T;
    c.step = 0.01;
    c.mc_paths = 10000;
    c.seed = 505;
    const auto res = sl_run(inst.data, inst.prior, inst.S, c);
    w.push_back(w2_gaussian_fit(res.outputs, inst.mean, inst.cov) / sqrt_p);
    detail += fmt("T=%g: W2/sqrt(p)=%.4f; ", T, w.back());
  }
  const double bound = 2.0 / std::sqrt(64.0) * 1.5;
  const bool pass = w[0] > w[1] && w[1] > w[2] && w[2] <= bound;
  return {pass, detail + fmt("strictly decreasing, final <= %.4f", bound)};
}

Outcome criterion6() {
  const auto inst = slab_only_instance();
  SlocConfig c;
  c.horizon = 64.0;
  c.step = 0.01;
  c.mc_paths = 5000;
  c.seed = 606;
  const auto rep = martingale_check(inst.data, inst.prior, inst.S, c);
  double worst = 0.0;
  std::string detail;
  for (std::size_t i = 1; i < rep.times.size(); ++i) {
    worst = std::max(worst, rep.max_z_score[i]);
    detail += fmt("t=%g: dev=%.2e z=%.2f; ", rep.times[i], rep.deviation_inf[i], rep.max_z_score[i]);
  }
  return {worst <= 4.0, detail + "all z <= 4"};
}

Outcome criterion7() {
  int good = 0;
  double min_mass = 1.0;
  for (int seed = 0; seed < 50; ++seed) {
    SyntheticSpec s;
    s.n = 200;
    s.p = 64;
    s.k = 3;
    s.signal_scale = 6.0;
    s.seed = 7000 + seed;
    const auto data = gen_synthetic(s);
    const auto prior = suggest_prior(200, 64, 1.0, 1.0);
    WarmStartOptions o;
    o.top_m = 6;
    o.max_extra = 0;
    const auto ws = warm_start(data, prior, o);
    std::vector<int> pool = ws.pool;
    for (int j : ws.state.z.active_indices()) pool.push_back(j);
    const int m = static_cast<int>(pool.size());
    const auto models = make_warm_start_set(ModelIndicator(64), pool, std::min(m, 12)).models;
    const auto table = enumerate_models(data, prior, models);
    const double mass = table.prob(data.truth->z_star);
    min_mass = std::min(min_mass, mass);
    if (mass >= 0.9) ++good;
  }
  return {good >= 45, fmt("pi(z*|y) >= 0.9 in %d/50 seeds (>= 45), min=%.4f", good, min_mass)};
}

// Correlated pair with opposite effects: either column alone fits badly, so
// the posterior splits between "both in" and "both out" modes.
Outcome criterion8() {
  SyntheticSpec s;
  s.n = 20;
  s.p = 8;
  s.k = 2;
  s.signal_scale = 36.0;
  s.design = DesignKind::kCorrelated;
  s.rho = 0.99;
  s.pairs = {{0, 1}};
  s.support = {0, 1};
  s.signs = {1.0, -1.0};
  s.seed = 808;
  const auto data = gen_synthetic(s);
  const auto prior = suggest_prior(20, 8, 1.0, 1.0);
  const auto table = enumerate_posterior(data, prior);
  double mass_on = 0.0, mass_off = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& z = table.models()[i];
    if (z[0] && z[1]) mass_on += table.probs()[i];
    if (!z[0] && !z[1]) mass_off += table.probs()[i];
  }

  std::vector<int> all(8);
  for (int j = 0; j < 8; ++j) all[j] = j;
  const auto S = make_warm_start_set(ModelIndicator(8), all, 3);
  SlocConfig c;
  c.horizon = 64.0;
  c.step = 0.01;
  c.mc_paths = 1000;
  c.seed = 809;
  const auto res = sl_run(data, prior, S, c);
  const auto sl_models = threshold_models(res.outputs, spike_slab_crossover(prior));
  const double tv_sl = z_tv(sl_models, table);
  double sl_on = 0.0;
  for (const auto& z : sl_models)
    if (z[0] && z[1]) sl_on += 1.0 / static_cast<double>(sl_models.size());

  GibbsConfig g;
  g.sweeps = 1;
  g.burn_in = 0;
  g.seed = 810;
  GibbsChain chain(data, prior, g, {data.truth->beta_star, data.truth->z_star});
  std::vector<ModelIndicator> zs;
  long joint_flips = 0;
  const auto t0 = std::chrono::steady_clock::now();
  while (seconds_since(t0) < res.wall_seconds) {
    for (int i = 0; i < 256; ++i) {
      const bool a = chain.state().z[0], b = chain.state().z[1];
      chain.step();
      if (chain.state().z[0] != a && chain.state().z[1] != b) ++joint_flips;
      zs.push_back(chain.state().z);
    }
  }
  const double tv_gibbs = z_tv(zs, table);
  const double rate = static_cast<double>(joint_flips) / static_cast<double>(zs.size());
  const bool pass = tv_sl <= tv_gibbs && rate < 0.01;
  return {pass, fmt("budget %.1fs: SL TV=%.4f, Gibbs TV=%.4f over %zu sweeps, joint-flip rate=%.2e (< 0.01); "
                    "pair-on mass=%.3f (SL %.3f), pair-off mass=%.3f",
                    res.wall_seconds, tv_sl, tv_gibbs, zs.size(), rate, mass_on, sl_on, mass_off)};
}

Outcome criterion9() {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(3);
  const Prior prior(0.5, 1.0, 2.0, 1.0);
  const RdTarget target(y, prior);
  const ModelIndicator z(1);
  const int N = 10000;
  Rng rng(909);
  std::vector<double> draws(N);
  for (int i = 0; i < N; ++i) draws[i] = sb_em_sample(z, target, 100, 128, rng)[0];
  auto logd = [&](double b) {
    Eigen::VectorXd v(1);
    v[0] = b;
    return rd_log_density(v, z, target);
  };
  const auto ref = oracle::quantile_sample(logd, -12.0, 12.0, N);
  const double w2 = w2_1d(draws, ref);

  const int M = 100000;
  SbOptions off;
  off.drift_off = true;
  Eigen::VectorXd x(M);
  Eigen::VectorXd p3 = Eigen::VectorXd::Zero(3);
  const RdTarget t3(y, prior);
  for (int i = 0; i < M; ++i) x[i] = sb_em_sample(z, t3, 100, 1, rng, off)[0];
  const double var = (x.array() - x.mean()).square().sum() / (M - 1);
  const double rel = std::abs(var / target.gamma - 1.0);
  return {w2 <= 0.05 && rel <= 0.05,
          fmt("W2 to quadrature=%.4f (<= 0.05), drift-off variance/gamma-1=%.4f (<= 0.05)", w2, rel)};
}

Outcome criterion10() {
  Rng rng(1010);
  const int N = 100000;
  std::vector<double> w(N);
  for (auto& v : w) v = pg_sample(0.0, rng);
  double worst = 0.0;
  std::string detail;
  for (double phi : {0.5, 1.0, 2.0}) {
    double s = 0.0;
    for (double v : w) s += std::exp(-v * phi * phi / 2.0);
    const double err = std::abs(s / N - 1.0 / std::cosh(phi / 2.0));
    worst = std::max(worst, err);
    detail += fmt("phi=%g err=%.2e; ", phi, err);
  }
  return {worst <= 0.01, detail + "all <= 0.01"};
}

// Randomized invariant suites; returns the failure count.
Outcome criterion11() {
  int failures = 0, checks = 0;
  int label = 0;
  std::map<int, int> by_label;
  auto check = [&](bool ok) {
    ++checks;
    ++label;
    if (!ok) {
      ++failures;
      ++by_label[label];
    }
  };
  for (int inst = 0; inst < 200; ++inst) {
    label = 0;
    Rng rng(110000 + inst);
    const int n = 5 + static_cast<int>(rng.index(26));
    const int p = 2 + static_cast<int>(rng.index(7));
    Eigen::MatrixXd X(n, p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
    Eigen::VectorXd y = X.col(0) * rng.normal() * 2.0 + rng.normal_vector(n);
    const double tau0 = 0.05 + 0.3 * rng.uniform();
    const Prior prior(0.05 + 0.9 * rng.uniform(), tau0, tau0 * (1.0 + 20.0 * rng.uniform()),
                      0.5 + rng.uniform());
    const Dataset data(X, y);

    // Normalization of the enumerated table.
    const auto table = enumerate_posterior(data, prior);
    double sum = 0.0;
    for (double v : table.probs()) sum += v;
    check(std::abs(sum - 1.0) <= 1e-12);
    const auto inc = table.inclusion_probs();
    check((inc.array() >= -1e-15).all() && (inc.array() <= 1.0 + 1e-12).all());

    // Marginal ratios: low-rank identity versus dense determinants.
    ModelIndicator z1(p), z2(p);
    for (int j = 0; j < p; ++j) {
      const bool a = rng.bernoulli(0.4);
      z1.set(j, a);
      z2.set(j, a || rng.bernoulli(0.5));
    }
    const double ratio = model_ratio_log(z1, z2, data, prior);
    const double dense = oracle::dense_model_log(z2, X, y, prior) - oracle::dense_model_log(z1, X, y, prior);
    check(std::abs(ratio - dense) <= 1e-8 * std::max(1.0, std::abs(dense)));
    check(std::abs(model_marginal_log(z2, data, prior, MarginalMethod::kInner) -
                   model_marginal_log(z2, data, prior, MarginalMethod::kDense)) <= 1e-8 * std::max(1.0, std::abs(dense)));

    // Cache coherence along a random walk of flips.
    LowRankCache cache(data, prior, {3, 16});
    ModelIndicator z(p);
    cache.rebuild(z);
    double worst = 0.0;
    for (int step = 0; step < 40; ++step) {
      const int flips = 1 + static_cast<int>(rng.index(3));
      for (int f = 0; f < flips; ++f) z.flip(static_cast<int>(rng.index(static_cast<std::size_t>(p))));
      cache.update(z);
      Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
      for (int j : z.active_indices()) M += prior.slab_weight() * X.col(j) * X.col(j).transpose();
      worst = std::max(worst, (cache.inverse() * M - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff());
    }
    check(worst <= 1e-8);

    // Site conditional versus joint-density differences.
    JointState st{rng.normal_vector(p), z1};
    const int j = static_cast<int>(rng.index(static_cast<std::size_t>(p)));
    JointState on = st, off = st;
    on.z.set(j, true);
    off.z.set(j, false);
    const double direct = log_joint_density(on, data, prior) - log_joint_density(off, data, prior);
    check(std::abs(z_site_logit(j, st, data, prior) - direct) <= 1e-8 * std::max(1.0, std::abs(direct)));

    // Drift is a convex combination; cached engine agrees with direct evaluation.
    WarmStartSet S;
    for (const auto& m : table.models())
      if (rng.bernoulli(0.5) || S.models.empty()) S.models.push_back(m);
    S.base = ModelIndicator(p);
    S.max_extra = p;
    LocalizationState ls;
    ls.t = 50.0 * rng.uniform();
    ls.theta = ls.t * rng.normal_vector(p) + std::sqrt(ls.t) * rng.normal_vector(p);
    const Eigen::VectorXd a = sl_drift(ls, S, data, prior);
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(p, 1e300), hi = -lo;
    for (const auto& m : S.models) {
      const auto c = tilted_component(m, ls, data, prior);
      lo = lo.cwiseMin(c.v);
      hi = hi.cwiseMax(c.v);
    }
    const double tol = 1e-10 * (1.0 + a.cwiseAbs().maxCoeff());
    check(((a - lo).array() >= -tol).all() && ((hi - a).array() >= -tol).all());
    const DriftEngine engine(data, prior, S);
    check((engine.drift(ls.theta, ls.t) - a).cwiseAbs().maxCoeff() <= 1e-8 * (1.0 + a.cwiseAbs().maxCoeff()));

    // Random-design coordinate update matches the density ratio.
    RdTarget rt(y, prior, 4.0 * tau0 * tau0 + 0.1);
    const double bj = st.beta[j];
    const double q_on = rd_inclusion_prob(bj, prior);
    const double lr = rd_log_density(st.beta, on.z, rt) - rd_log_density(st.beta, off.z, rt);
    check(std::abs(q_on - 1.0 / (1.0 + std::exp(-lr))) <= 1e-12);

    // TV between tables: symmetry and triangle inequality.
    auto random_table = [&] {
      std::vector<double> lw;
      for (std::size_t i = 0; i < table.size(); ++i) lw.push_back(rng.normal());
      return PosteriorTable(p, table.models(), lw);
    };
    const auto ta = random_table(), tb = random_table(), tc = random_table();
    check(std::abs(table_tv(ta, tb) - table_tv(tb, ta)) <= 1e-15);
    check(table_tv(ta, tc) <= table_tv(ta, tb) + table_tv(tb, tc) + 1e-12);

    // w2_1d triangle inequality.
    std::vector<double> u(50), v(50), w(50);
    for (int i = 0; i < 50; ++i) {
      u[i] = rng.normal();
      v[i] = 2.0 * rng.normal() + 1.0;
      w[i] = rng.exponential();
    }
    check(w2_1d(u, w) <= w2_1d(u, v) + w2_1d(v, w) + 1e-12);
  }
  std::string which;
  for (auto [l, c] : by_label) which += fmt(" check#%d x%d", l, c);
  return {failures == 0, fmt("%d failures in %d checks over 200 instances", failures, checks) + which};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"Gibbs oracle TV (p=8, n=20)", criterion1},
      {"Stochastic localization oracle TV and inclusion (p=8, n=20)", criterion2},
      {"Exact drift versus Gauss-Hermite quadrature (p=2)", criterion3},
      {"Fast Gaussian sampler moments", criterion4},
      {"W2 decay of localization on a Gaussian target", criterion5},
      {"Martingale property of the drift", criterion6},
      {"Posterior contraction (n=200, p=64, k=3)", criterion7},
      {"Correlated design: localization versus single-site Gibbs", criterion8},
      {"Schrodinger-bridge inner sampler", criterion9},
      {"Polya-Gamma Laplace transform", criterion10},
      {"Randomized invariant suites", criterion11},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d: %s | %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
