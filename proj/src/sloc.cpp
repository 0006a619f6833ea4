#include "sslab/sloc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <thread>

#include "sslab/error.hpp"
#include "sslab/numeric.hpp"

namespace sslab {

void WarmStartSet::validate() const {
  if (models.empty()) throw ConfigError("warm start set: empty");
  std::set<std::string> seen;
  for (const auto& z : models) {
    if (base.size() > 0) {
      if (!base.subset_of(z)) throw ConfigError("warm start set: member does not contain base");
      if (z.active_count() > base.active_count() + max_extra)
        throw ConfigError("warm start set: member exceeds max_extra additions");
    }
    if (!seen.insert(z.to_string()).second) throw ConfigError("warm start set: duplicate model");
  }
}

WarmStartSet make_warm_start_set(const ModelIndicator& base, std::span<const int> pool,
                                 int max_extra) {
  if (max_extra < 0) throw ConfigError("warm start set: max_extra must be >= 0");
  std::vector<int> cand;
  for (int j : pool) {
    if (j < 0 || j >= base.size()) throw DimensionError("warm start set: pool index out of range");
    if (!base[j] && std::find(cand.begin(), cand.end(), j) == cand.end()) cand.push_back(j);
  }
  std::sort(cand.begin(), cand.end());
  WarmStartSet S;
  S.base = base;
  S.max_extra = max_extra;
  // Enumerate subsets of cand by size, lexicographically.
  const int m = static_cast<int>(cand.size());
  for (int size = 0; size <= std::min(max_extra, m); ++size) {
    std::vector<int> pick(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) pick[static_cast<std::size_t>(i)] = i;
    for (;;) {
      ModelIndicator z = base;
      for (int i : pick) z.set(cand[static_cast<std::size_t>(i)], true);
      S.models.push_back(std::move(z));
      int i = size - 1;
      while (i >= 0 && pick[static_cast<std::size_t>(i)] == m - size + i) --i;
      if (i < 0) break;
      ++pick[static_cast<std::size_t>(i)];
      for (int r = i + 1; r < size; ++r) pick[static_cast<std::size_t>(r)] = pick[static_cast<std::size_t>(r - 1)] + 1;
    }
  }
  return S;
}

WarmStartSet full_model_set(int p) {
  if (p > 16) throw GuardError("full_model_set: p > 16");
  WarmStartSet S;
  S.base = ModelIndicator(p);
  S.max_extra = p;
  for (std::uint64_t m = 0; m < (1ULL << p); ++m) S.models.push_back(ModelIndicator::from_mask(p, m));
  return S;
}

void SlocConfig::validate() const {
  if (!(horizon > 0.0)) throw ConfigError("sloc: horizon must be positive");
  if (!(step > 0.0) || step > horizon) throw ConfigError("sloc: need 0 < step <= horizon");
  const double k = horizon / step;
  if (std::abs(k - std::round(k)) > 1e-6 * k) throw ConfigError("sloc: horizon / step must be integral");
  if (mc_paths < 1) throw ConfigError("sloc: mc_paths must be >= 1");
  if (jobs < 1) throw ConfigError("sloc: jobs must be >= 1");
}

long SlocConfig::steps() const { return std::lround(horizon / step); }

namespace {

double log_component_prior(int k, const Prior& prior) {
  return k * (std::log(prior.q * prior.tau0) - std::log((1.0 - prior.q) * prior.tau1));
}

}  // namespace

TiltedComponent tilted_component(const ModelIndicator& z, const LocalizationState& state,
                                 const Dataset& data, const Prior& prior) {
  const int p = data.p();
  if (z.size() != p || state.theta.size() != p) throw DimensionError("tilted_component: dimension mismatch");
  if (state.t < 0.0) throw ConfigError("tilted_component: t must be >= 0");
  const double s2 = prior.sigma * prior.sigma;
  const double p0 = 1.0 / square(prior.tau0) + state.t;
  const auto active = z.active_indices();
  const auto k = static_cast<Eigen::Index>(active.size());

  TiltedComponent out;
  out.v = state.theta / p0;
  double log_c = log_component_prior(static_cast<int>(k), prior) - 0.5 * (p - k) * std::log(p0);
  for (int j = 0; j < p; ++j)
    if (!z[j]) log_c += 0.5 * square(state.theta[j]) / p0;

  if (k > 0) {
    const Eigen::MatrixXd Xz = select_columns(data.X, active);
    Eigen::MatrixXd A = Xz.transpose() * Xz / s2;
    A.diagonal().array() += 1.0 / square(prior.tau1) + state.t;
    Eigen::VectorXd r = Xz.transpose() * data.y / s2;
    for (Eigen::Index c = 0; c < k; ++c) r[c] += state.theta[active[c]];
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) throw NumericalError("tilted_component: factorization failed");
    const Eigen::VectorXd va = llt.solve(r);
    for (Eigen::Index c = 0; c < k; ++c) out.v[active[c]] = va[c];
    log_c += 0.5 * r.dot(va) - llt.matrixLLT().diagonal().array().log().sum();
  }
  out.log_c = log_c;
  return out;
}

Eigen::VectorXd sl_drift(const LocalizationState& state, const WarmStartSet& S,
                         const Dataset& data, const Prior& prior) {
  if (S.models.empty()) throw ConfigError("sl_drift: empty model set");
  std::vector<TiltedComponent> comps;
  std::vector<double> logc;
  comps.reserve(S.models.size());
  for (const auto& z : S.models) {
    comps.push_back(tilted_component(z, state, data, prior));
    logc.push_back(comps.back().log_c);
  }
  const double lse = log_sum_exp(logc);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(data.p());
  for (std::size_t i = 0; i < comps.size(); ++i) a += std::exp(logc[i] - lse) * comps[i].v;
  return a;
}

DriftEngine::DriftEngine(const Dataset& data, const Prior& prior, const WarmStartSet& S)
    : p_(data.p()), prior_(prior) {
  if (S.models.empty()) throw ConfigError("drift engine: empty model set");
  const double s2 = prior.sigma * prior.sigma;
  models_.reserve(S.models.size());
  for (const auto& z : S.models) {
    if (z.size() != p_) throw DimensionError("drift engine: model length differs from p");
    Cached c;
    c.active = z.active_indices();
    const Eigen::MatrixXd Xz = select_columns(data.X, c.active);
    const Eigen::MatrixXd G = Xz.transpose() * Xz / s2;
    if (G.rows() > 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
      c.eigvecs = es.eigenvectors();
      c.eigvals = es.eigenvalues().cwiseMax(0.0);
    }
    c.xty = Xz.transpose() * data.y / s2;
    c.log_prior_factor = log_component_prior(static_cast<int>(c.active.size()), prior);
    max_k_ = std::max<Eigen::Index>(max_k_, static_cast<Eigen::Index>(c.active.size()));
    models_.push_back(std::move(c));
  }
}

DriftEngine::Workspace DriftEngine::workspace() const {
  Workspace ws;
  ws.log_c.resize(static_cast<Eigen::Index>(models_.size()));
  ws.v_active.resize(std::max<Eigen::Index>(max_k_, 1), static_cast<Eigen::Index>(models_.size()));
  ws.tmp.resize(std::max<Eigen::Index>(max_k_, 1));
  return ws;
}

void DriftEngine::drift_into(const Eigen::VectorXd& theta, double t, Workspace& ws,
                             Eigen::VectorXd& out, std::size_t* top_model,
                             double* top_weight) const {
  const double p0 = 1.0 / square(prior_.tau0) + t;
  const double shift = 1.0 / square(prior_.tau1) + t;
  const double log_p0 = std::log(p0);
  const double theta_sq = theta.squaredNorm();
  double max_log = -std::numeric_limits<double>::infinity();
  const auto m = static_cast<Eigen::Index>(models_.size());

  for (Eigen::Index i = 0; i < m; ++i) {
    const Cached& c = models_[static_cast<std::size_t>(i)];
    const auto k = static_cast<Eigen::Index>(c.active.size());
    double inactive_sq = theta_sq;
    double quad = 0.0, logdet = 0.0;
    if (k > 0) {
      auto r = ws.tmp.head(k);
      for (Eigen::Index a = 0; a < k; ++a) {
        const double th = theta[c.active[static_cast<std::size_t>(a)]];
        r[a] = c.xty[a] + th;
        inactive_sq -= th * th;
      }
      // A^{-1} r = V (L + shift)^{-1} V^T r
      Eigen::VectorXd w = c.eigvecs.transpose() * r;
      for (Eigen::Index a = 0; a < k; ++a) {
        const double d = c.eigvals[a] + shift;
        quad += w[a] * w[a] / d;
        logdet += std::log(d);
        w[a] /= d;
      }
      ws.v_active.col(i).head(k).noalias() = c.eigvecs * w;
    }
    const double lc = c.log_prior_factor + 0.5 * quad - 0.5 * logdet +
                      0.5 * std::max(inactive_sq, 0.0) / p0 - 0.5 * static_cast<double>(p_ - k) * log_p0;
    ws.log_c[i] = lc;
    max_log = std::max(max_log, lc);
  }
  if (!std::isfinite(max_log)) throw NumericalError("drift: non-finite component weights");

  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    ws.log_c[i] = std::exp(ws.log_c[i] - max_log);
    total += ws.log_c[i];
  }
  out = theta / p0;
  std::size_t best = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double w = ws.log_c[i] / total;
    if (ws.log_c[i] > ws.log_c[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(i);
    const Cached& c = models_[static_cast<std::size_t>(i)];
    for (std::size_t a = 0; a < c.active.size(); ++a) {
      const int j = c.active[a];
      out[j] += w * (ws.v_active(static_cast<Eigen::Index>(a), i) - theta[j] / p0);
    }
  }
  if (top_model) *top_model = best;
  if (top_weight) *top_weight = ws.log_c[static_cast<Eigen::Index>(best)] / total;
}

Eigen::VectorXd DriftEngine::drift(const Eigen::VectorXd& theta, double t) const {
  auto ws = workspace();
  Eigen::VectorXd out;
  drift_into(theta, t, ws, out);
  return out;
}

TiltedComponent DriftEngine::component(std::size_t i, const Eigen::VectorXd& theta, double t) const {
  auto ws = workspace();
  Eigen::VectorXd ignored;
  drift_into(theta, t, ws, ignored);
  // Recompute the unnormalized log weight and mean for model i alone.
  const Cached& c = models_.at(i);
  const double p0 = 1.0 / square(prior_.tau0) + t;
  const double shift = 1.0 / square(prior_.tau1) + t;
  const auto k = static_cast<Eigen::Index>(c.active.size());
  TiltedComponent out;
  out.v = theta / p0;
  double inactive_sq = theta.squaredNorm();
  double quad = 0.0, logdet = 0.0;
  if (k > 0) {
    Eigen::VectorXd r(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      r[a] = c.xty[a] + theta[c.active[static_cast<std::size_t>(a)]];
      inactive_sq -= square(theta[c.active[static_cast<std::size_t>(a)]]);
    }
    Eigen::VectorXd w = c.eigvecs.transpose() * r;
    for (Eigen::Index a = 0; a < k; ++a) {
      const double d = c.eigvals[a] + shift;
      quad += w[a] * w[a] / d;
      logdet += std::log(d);
      w[a] /= d;
    }
    const Eigen::VectorXd va = c.eigvecs * w;
    for (Eigen::Index a = 0; a < k; ++a) out.v[c.active[static_cast<std::size_t>(a)]] = va[a];
  }
  out.log_c = c.log_prior_factor + 0.5 * quad - 0.5 * logdet + 0.5 * std::max(inactive_sq, 0.0) / p0 -
              0.5 * static_cast<double>(p_ - k) * std::log(p0);
  return out;
}

namespace {

template <typename Fn>
void parallel_paths(int paths, int jobs, Fn&& fn) {
  jobs = std::max(1, std::min(jobs, paths));
  if (jobs == 1) {
    for (int i = 0; i < paths; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> workers;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      for (int i = w; i < paths; i += jobs) fn(i);
    });
  }
}

void check_convex(const DriftEngine& engine, const Eigen::VectorXd& theta, double t,
                  const Eigen::VectorXd& a) {
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(a.size(), std::numeric_limits<double>::infinity());
  Eigen::VectorXd hi = -lo;
  for (std::size_t i = 0; i < engine.size(); ++i) {
    const auto c = engine.component(i, theta, t);
    lo = lo.cwiseMin(c.v);
    hi = hi.cwiseMax(c.v);
  }
  const double tol = 1e-10 * (1.0 + a.cwiseAbs().maxCoeff());
  if (((a - lo).array() < -tol).any() || ((a - hi).array() > tol).any())
    throw NumericalError("sl_run: drift left the convex hull of the component means");
}

}  // namespace

SlocResult sl_run(const Dataset& data, const Prior& prior, const WarmStartSet& S,
                  const SlocConfig& config, const SlocOptions& options) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const DriftEngine engine(data, prior, S);
  const long K = config.steps();
  const double h = config.step;
  const double sqrt_h = std::sqrt(h);
  const int p = data.p();

  SlocResult res;
  res.outputs.resize(config.mc_paths, p);
  std::vector<std::vector<SlocTraceRow>> traces(static_cast<std::size_t>(config.mc_paths));

  parallel_paths(config.mc_paths, config.jobs, [&](int path) {
    Rng rng = Rng::stream(config.seed, static_cast<std::uint64_t>(path));
    auto ws = engine.workspace();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd a(p);
    for (long k = 0; k < K; ++k) {
      const double t = static_cast<double>(k) * h;
      std::size_t top = 0;
      double top_w = 0.0;
      engine.drift_into(theta, t, ws, a, &top, &top_w);
      if (options.check_convex) check_convex(engine, theta, t, a);
      if (options.trace && k % options.trace_every == 0)
        traces[static_cast<std::size_t>(path)].push_back({path, t, a.norm(), top, top_w});
      for (int j = 0; j < p; ++j) theta[j] += h * a[j] + sqrt_h * rng.normal();
    }
    engine.drift_into(theta, static_cast<double>(K) * h, ws, a);
    res.outputs.row(path) = a.transpose();
  });
  if (options.trace)
    for (auto& tr : traces) res.trace.insert(res.trace.end(), tr.begin(), tr.end());
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

MartingaleReport martingale_check(const Dataset& data, const Prior& prior, const WarmStartSet& S,
                                  const SlocConfig& config) {
  config.validate();
  const DriftEngine engine(data, prior, S);
  const long K = config.steps();
  const double h = config.step;
  const int p = data.p();
  const std::vector<long> marks = {0, K / 4, K / 2, K};

  MartingaleReport rep;
  for (long m : marks) rep.times.push_back(static_cast<double>(m) * h);
  rep.initial = engine.drift(Eigen::VectorXd::Zero(p), 0.0);

  const auto nm = marks.size();
  std::vector<Eigen::MatrixXd> values(nm, Eigen::MatrixXd(config.mc_paths, p));
  parallel_paths(config.mc_paths, config.jobs, [&](int path) {
    Rng rng = Rng::stream(config.seed, static_cast<std::uint64_t>(path));
    auto ws = engine.workspace();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd a(p);
    std::size_t next = 0;
    for (long k = 0; k <= K; ++k) {
      const double t = static_cast<double>(k) * h;
      engine.drift_into(theta, t, ws, a);
      while (next < nm && marks[next] == k) values[next++].row(path) = a.transpose();
      if (k == K) break;
      for (int j = 0; j < p; ++j) theta[j] += h * a[j] + std::sqrt(h) * rng.normal();
    }
  });

  const double N = config.mc_paths;
  for (std::size_t c = 0; c < nm; ++c) {
    // Averaging offsets from a(0, 0) keeps the t = 0 deviation exactly zero.
    const Eigen::MatrixXd offsets = values[c].rowwise() - rep.initial.transpose();
    const Eigen::VectorXd mean_offset = offsets.colwise().mean().transpose();
    const Eigen::VectorXd mean = rep.initial + mean_offset;
    const Eigen::MatrixXd centered = offsets.rowwise() - mean_offset.transpose();
    const Eigen::VectorXd var =
        centered.array().square().colwise().sum().transpose() / std::max(1.0, N - 1.0);
    const Eigen::VectorXd se = (var / N).cwiseSqrt();
    rep.means.push_back(mean);
    rep.std_errors.push_back(se);
    rep.path_variance.push_back(var);
    const Eigen::VectorXd dev = mean_offset.cwiseAbs();
    rep.deviation_inf.push_back(dev.maxCoeff());
    double zmax = 0.0;
    for (int j = 0; j < p; ++j) {
      if (se[j] > 0.0) {
        zmax = std::max(zmax, dev[j] / se[j]);
      } else if (dev[j] > 1e-12) {
        zmax = std::numeric_limits<double>::infinity();
      }
    }
    rep.max_z_score.push_back(zmax);
  }
  return rep;
}

namespace {

void check_ortho_args(int j, const LocalizationState& state, const Dataset& data) {
  if (j < 0 || j >= data.p() || state.theta.size() != data.p())
    throw DimensionError("ortho drift: index or dimension mismatch");
}

}  // namespace

double ortho_drift_pointmass(int j, const LocalizationState& state, const Dataset& data,
                             const Prior& prior) {
  check_ortho_args(j, state, data);
  const double s2 = prior.sigma * prior.sigma;
  const double b = state.theta[j] + data.X.col(j).dot(data.y) / s2;
  const double p1 = state.t + data.X.col(j).squaredNorm() / s2 + 1.0 / square(prior.tau1);
  // a = (b / p1) / (1 + ((1-q)/q) tau1 sqrt(p1) exp(-b^2 / (2 p1)))
  const double log_spike = -prior.log_prior_odds() + std::log(prior.tau1) + 0.5 * std::log(p1) -
                           b * b / (2.0 * p1);
  return (b / p1) * sigmoid(-log_spike);
}

double ortho_drift_gaussian(int j, const LocalizationState& state, const Dataset& data,
                            const Prior& prior) {
  check_ortho_args(j, state, data);
  const double s2 = prior.sigma * prior.sigma;
  const double theta = state.theta[j];
  const double b = theta + data.X.col(j).dot(data.y) / s2;
  const double p1 = state.t + data.X.col(j).squaredNorm() / s2 + 1.0 / square(prior.tau1);
  const double p0 = state.t + 1.0 / square(prior.tau0);
  const double log_w1 = std::log(prior.q) - std::log(prior.tau1) - 0.5 * std::log(p1) + b * b / (2.0 * p1);
  const double log_w0 = std::log1p(-prior.q) - std::log(prior.tau0) - 0.5 * std::log(p0) +
                        theta * theta / (2.0 * p0);
  const double pi1 = sigmoid(log_w1 - log_w0);
  return pi1 * (b / p1) + (1.0 - pi1) * (theta / p0);
}

}  // namespace sslab
