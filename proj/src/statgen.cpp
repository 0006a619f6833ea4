#include "sslab/statgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "sslab/error.hpp"
#include "sslab/numeric.hpp"
#include "sslab/rng.hpp"

namespace sslab {

void SyntheticSpec::validate() const {
  if (n < 1 || p < 1) throw ConfigError("synthetic: n and p must be positive");
  if (k < 0 || k > p) throw ConfigError("synthetic: need 0 <= k <= p");
  if (!(signal_scale >= 0.0)) throw ConfigError("synthetic: signal_scale must be >= 0");
  if (!(sigma > 0.0)) throw ConfigError("synthetic: sigma must be positive");
  if (!support.empty()) {
    if (static_cast<int>(support.size()) != k) throw ConfigError("synthetic: support size differs from k");
    std::set<int> s(support.begin(), support.end());
    if (static_cast<int>(s.size()) != k || *s.begin() < 0 || *s.rbegin() >= p)
      throw ConfigError("synthetic: support indices invalid");
  }
  if (!signs.empty()) {
    if (static_cast<int>(signs.size()) != k) throw ConfigError("synthetic: signs size differs from k");
    for (double v : signs)
      if (v != 1.0 && v != -1.0) throw ConfigError("synthetic: signs must be +1 or -1");
  }
  if (design == DesignKind::kOrthogonal && n < p)
    throw DimensionError("synthetic: orthogonal design needs n >= p");
  if (design == DesignKind::kCorrelated) {
    if (!(rho > -1.0 && rho < 1.0)) throw ConfigError("synthetic: need |rho| < 1");
    for (auto [a, b] : pairs)
      if (a < 0 || b < 0 || a >= p || b >= p || a == b) throw ConfigError("synthetic: bad column pair");
  }
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int n = spec.n, p = spec.p;
  Eigen::MatrixXd X(n, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < n; ++i) X(i, j) = rng.normal();

  if (spec.design == DesignKind::kOrthogonal) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
    X = std::sqrt(static_cast<double>(n)) * Q;
  } else if (spec.design == DesignKind::kCorrelated) {
    const double c = std::sqrt(1.0 - spec.rho * spec.rho);
    for (auto [a, b] : spec.pairs) {
      const Eigen::VectorXd xa = X.col(a) / X.col(a).norm();
      const Eigen::VectorXd xb = X.col(b) / X.col(b).norm();
      X.col(b) = std::sqrt(static_cast<double>(n)) * (spec.rho * xa + c * xb);
    }
  }
  if (spec.normalize_columns) {
    for (int j = 0; j < p; ++j) {
      const double norm = X.col(j).norm();
      if (norm > 0.0) X.col(j) *= std::sqrt(static_cast<double>(n)) / norm;
    }
  }

  std::vector<int> support = spec.support;
  if (support.empty() && spec.k > 0) {
    std::vector<int> idx(static_cast<std::size_t>(p));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < spec.k; ++i) {
      const auto r = static_cast<std::size_t>(i) + rng.index(static_cast<std::size_t>(p - i));
      std::swap(idx[static_cast<std::size_t>(i)], idx[r]);
    }
    support.assign(idx.begin(), idx.begin() + spec.k);
  }
  std::sort(support.begin(), support.end());

  const double unit = spec.sigma * std::sqrt(std::log(static_cast<double>(p)) / n);
  Truth truth;
  truth.beta_star = Eigen::VectorXd::Zero(p);
  truth.z_star = ModelIndicator(p);
  for (std::size_t a = 0; a < support.size(); ++a) {
    const double sign = spec.signs.empty() ? (rng.bernoulli(0.5) ? 1.0 : -1.0) : spec.signs[a];
    truth.beta_star[support[a]] = sign * spec.signal_scale * unit;
    // A zero signal (signal_scale = 0, or p = 1) leaves the coordinate out of z*.
    if (truth.beta_star[support[a]] != 0.0) truth.z_star.set(support[a], true);
  }

  Eigen::VectorXd y = X * truth.beta_star;
  for (int i = 0; i < n; ++i) y[i] += spec.sigma * rng.normal();
  Dataset d(std::move(X), std::move(y), std::move(truth));
  d.sigma_hint = spec.sigma;
  return d;
}

Prior suggest_prior(int n, int p, double sigma, double delta) {
  if (n < 1 || p < 1) throw ConfigError("suggest_prior: n and p must be positive");
  if (!(delta >= 0.0)) throw ConfigError("suggest_prior: delta must be >= 0");
  const double odds = std::pow(static_cast<double>(p), -(delta + 1.0));
  const double rn = std::sqrt(static_cast<double>(n));
  return Prior(odds / (1.0 + odds), sigma / rn, sigma * p / rn, sigma, delta);
}

std::vector<int> LassoResult::support() const {
  std::vector<int> s;
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    if (std::abs(beta[j]) > 1e-10) s.push_back(static_cast<int>(j));
  return s;
}

double default_lasso_lambda(int n, int p, double sigma) {
  return 2.0 * sigma * std::sqrt(2.0 * n * std::log(std::max(2, p)));
}

namespace {

double soft_threshold(double x, double a) {
  if (x > a) return x - a;
  if (x < -a) return x + a;
  return 0.0;
}

// Gap of the un-halved objective, through the halved problem's dual.
double lasso_gap(const Dataset& data, double half_lambda, const Eigen::VectorXd& beta,
                 const Eigen::VectorXd& r) {
  const double xtr = (data.X.transpose() * r).cwiseAbs().maxCoeff();
  const double s = xtr > half_lambda ? half_lambda / xtr : 1.0;
  const double primal = 0.5 * r.squaredNorm() + half_lambda * beta.lpNorm<1>();
  const double dual = 0.5 * data.y.squaredNorm() - 0.5 * (data.y - s * r).squaredNorm();
  return 2.0 * std::max(0.0, primal - dual);
}

}  // namespace

LassoResult lasso_fit(const Dataset& data, double lambda, const LassoOptions& options) {
  if (!(lambda >= 0.0)) throw ConfigError("lasso: lambda must be >= 0");
  const int p = data.p();
  const double half = 0.5 * lambda;
  const Eigen::VectorXd col_sq = data.X.colwise().squaredNorm().transpose();
  const double scale = std::max(1.0, data.y.squaredNorm());
  LassoResult res;
  res.beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd r = data.y;
  for (int pass = 1; pass <= options.max_passes; ++pass) {
    for (int j = 0; j < p; ++j) {
      if (col_sq[j] <= 0.0) continue;
      const double old = res.beta[j];
      const double rho = data.X.col(j).dot(r) + col_sq[j] * old;
      const double next = soft_threshold(rho, half) / col_sq[j];
      if (next != old) {
        r.noalias() -= (next - old) * data.X.col(j);
        res.beta[j] = next;
      }
    }
    res.passes = pass;
    res.duality_gap = lasso_gap(data, half, res.beta, r);
    if (res.duality_gap <= options.tol * scale) return res;
  }
  throw ConvergenceError("lasso: no convergence within max_passes", res.duality_gap);
}

double lasso_kkt_residual(const Dataset& data, double lambda, const Eigen::VectorXd& beta) {
  const double half = 0.5 * lambda;
  const Eigen::VectorXd g = data.X.transpose() * (data.y - data.X * beta);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double v = beta[j] != 0.0 ? std::abs(g[j] - half * (beta[j] > 0 ? 1.0 : -1.0))
                                    : std::max(0.0, std::abs(g[j]) - half);
    worst = std::max(worst, v);
  }
  return worst;
}

WarmStart warm_start(const Dataset& data, const Prior& prior, const WarmStartOptions& options) {
  const int p = data.p();
  const double lambda =
      options.lambda >= 0.0 ? options.lambda : default_lasso_lambda(data.n(), p, prior.sigma);
  WarmStart ws;
  ws.lasso = lasso_fit(data, lambda);
  const auto lasso_support = ws.lasso->support();

  ModelIndicator base(p, lasso_support);
  if (options.use_truth) {
    if (!data.truth) throw ConfigError("warm start: truth requested but absent");
    base = data.truth->z_star;
  }
  std::set<int> pool(lasso_support.begin(), lasso_support.end());
  if (options.top_m > 0) {
    const Eigen::VectorXd corr = (data.X.transpose() * data.y).cwiseAbs();
    std::vector<int> idx(static_cast<std::size_t>(p));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return corr[a] > corr[b]; });
    for (int i = 0; i < std::min(options.top_m, p); ++i) pool.insert(idx[static_cast<std::size_t>(i)]);
  }
  for (int j : pool)
    if (!base[j]) ws.pool.push_back(j);

  ws.state.z = base;
  ws.state.beta = Eigen::VectorXd::Zero(p);
  if (base.active_count() > 0) {
    const auto cond = beta_conditional_params(base, data, prior);
    for (std::size_t a = 0; a < cond.active.size(); ++a)
      ws.state.beta[cond.active[a]] = cond.mean[static_cast<Eigen::Index>(a)];
  }
  ws.set = make_warm_start_set(base, ws.pool, options.max_extra);
  return ws;
}

std::vector<ModelIndicator> all_supports_up_to(int p, int k) {
  std::vector<ModelIndicator> out;
  auto pool = std::vector<int>(static_cast<std::size_t>(p));
  std::iota(pool.begin(), pool.end(), 0);
  return make_warm_start_set(ModelIndicator(p), pool, std::min(k, p)).models;
}

namespace {

// X^T (I + w X_z X_z^T)^{-1} X from the Gram matrix.
Eigen::MatrixXd whitened_gram(const Eigen::MatrixXd& G, const std::vector<int>& active, double w) {
  if (active.empty()) return G;
  const auto k = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd Gz(G.rows(), k);
  for (Eigen::Index a = 0; a < k; ++a) Gz.col(a) = G.col(active[static_cast<std::size_t>(a)]);
  Eigen::MatrixXd inner(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) inner(a, b) = Gz(active[static_cast<std::size_t>(b)], a);
  inner.diagonal().array() += 1.0 / w;
  return G - Gz * inner.llt().solve(Gz.transpose());
}

bool is_exhaustive(const std::vector<ModelIndicator>& pool, int p, int k) {
  std::set<std::string> seen;
  for (const auto& z : pool)
    if (z.active_count() <= k) seen.insert(z.to_string());
  return seen.size() == all_supports_up_to(p, k).size();
}

void check_pool(const std::vector<ModelIndicator>& pool, int p, int k) {
  if (k < 0) throw ConfigError("design stats: k must be >= 0");
  if (pool.empty()) throw ConfigError("design stats: empty support pool");
  for (const auto& z : pool) {
    if (z.size() != p) throw DimensionError("design stats: support length differs from p");
    if (z.active_count() > k) throw ConfigError("design stats: support larger than k in pool");
  }
}

}  // namespace

DesignStat coherence(const Dataset& data, const Prior& prior, int k,
                     const std::vector<ModelIndicator>& pool) {
  const int p = data.p();
  check_pool(pool, p, k);
  const Eigen::MatrixXd G = data.X.transpose() * data.X;
  DesignStat out;
  out.value = 0.0;
  out.argmin_z = pool.front();
  for (const auto& z : pool) {
    const Eigen::MatrixXd K = whitened_gram(G, z.active_indices(), prior.slab_weight());
    for (int j = 0; j < p; ++j) {
      if (z[j]) continue;
      for (int i = 0; i < p; ++i) {
        if (i == j) continue;
        if (std::abs(K(j, i)) > out.value) {
          out.value = std::abs(K(j, i));
          out.argmin_z = z;
        }
      }
    }
  }
  out.exhaustive = is_exhaustive(pool, p, k);
  return out;
}

DesignStat restricted_eig(const Dataset& data, const Prior& prior, int k,
                          const std::vector<ModelIndicator>& pool) {
  const int p = data.p();
  check_pool(pool, p, k);
  const Eigen::MatrixXd G = data.X.transpose() * data.X;
  DesignStat out;
  out.value = std::numeric_limits<double>::infinity();
  out.argmin_z = pool.front();
  for (const auto& z : pool) {
    const auto inactive = z.inactive_indices();
    const int m = std::min<int>(k, static_cast<int>(inactive.size()));
    if (m == 0) continue;
    const Eigen::MatrixXd K = whitened_gram(G, z.active_indices(), prior.slab_weight());
    // By eigenvalue interlacing the minimum over |supp v| <= k is attained at size m.
    std::vector<int> pick(static_cast<std::size_t>(m));
    std::iota(pick.begin(), pick.end(), 0);
    const int nin = static_cast<int>(inactive.size());
    Eigen::MatrixXd sub(m, m);
    for (;;) {
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
          sub(a, b) = K(inactive[static_cast<std::size_t>(pick[static_cast<std::size_t>(a)])],
                        inactive[static_cast<std::size_t>(pick[static_cast<std::size_t>(b)])]);
      const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sub, Eigen::EigenvaluesOnly)
                            .eigenvalues()[0];
      if (lo < out.value) {
        out.value = lo;
        out.argmin_z = z;
      }
      int i = m - 1;
      while (i >= 0 && pick[static_cast<std::size_t>(i)] == nin - m + i) --i;
      if (i < 0) break;
      ++pick[static_cast<std::size_t>(i)];
      for (int r = i + 1; r < m; ++r) pick[static_cast<std::size_t>(r)] = pick[static_cast<std::size_t>(r - 1)] + 1;
    }
  }
  out.exhaustive = is_exhaustive(pool, p, k);
  return out;
}

DesignStat coherence_exhaustive(const Dataset& data, const Prior& prior, int k) {
  if (data.p() > 12 || k > 3) throw GuardError("coherence: exhaustive enumeration needs p <= 12, k <= 3");
  return coherence(data, prior, k, all_supports_up_to(data.p(), k));
}

DesignStat restricted_eig_exhaustive(const Dataset& data, const Prior& prior, int k) {
  if (data.p() > 12 || k > 3)
    throw GuardError("restricted_eig: exhaustive enumeration needs p <= 12, k <= 3");
  return restricted_eig(data, prior, k, all_supports_up_to(data.p(), k));
}

BetaMinReport beta_min_check(const Dataset& data, const Prior& prior, double c) {
  if (!data.truth) throw ConfigError("beta_min_check: dataset has no truth");
  if (!(c > 0.0)) throw ConfigError("beta_min_check: c must be positive");
  const auto& t = *data.truth;
  BetaMinReport rep;
  rep.c = c;
  rep.threshold = c * prior.sigma * std::sqrt(std::log(static_cast<double>(data.p())) / data.n());
  double min_active = std::numeric_limits<double>::infinity();
  double inactive_sq = 0.0;
  for (int j = 0; j < data.p(); ++j) {
    if (t.z_star[j]) {
      min_active = std::min(min_active, std::abs(t.beta_star[j]));
    } else {
      inactive_sq += square(t.beta_star[j]);
    }
  }
  rep.inactive_norm = std::sqrt(inactive_sq);
  // No active coordinate: nothing to detect, reported as a failure.
  rep.margin = t.z_star.active_count() == 0 ? 0.0 : min_active / rep.threshold;
  constexpr double kEps = 4 * std::numeric_limits<double>::epsilon();
  rep.pass = rep.margin >= 1.0 - kEps && rep.inactive_norm == 0.0;
  return rep;
}

}  // namespace sslab
