#include "sslab/logistic.hpp"

#include <cmath>
#include <iostream>
#include <numbers>

#include "sslab/error.hpp"
#include "sslab/numeric.hpp"

namespace sslab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTrunc = 0.64;  // switch point of the two series

double std_normal_cdf_log(double x) { return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2)); }

// Coefficient a_n(x) of the alternating series for J*(1, 0).
double series_coef(int n, double x) {
  const double k = n + 0.5;
  if (x > kTrunc) return kPi * k * std::exp(-k * k * kPi * kPi * x / 2.0);
  return std::pow(2.0 / (kPi * x), 1.5) * kPi * k * std::exp(-2.0 * k * k / x);
}

// Probability of drawing from the truncated exponential proposal.
double mass_texpon(double z) {
  const double t = kTrunc;
  const double fz = kPi * kPi / 8.0 + z * z / 2.0;
  const double b = std::sqrt(1.0 / t) * (t * z - 1.0);
  const double a = -std::sqrt(1.0 / t) * (t * z + 1.0);
  const double x0 = std::log(fz) + fz * t;
  const double xb = x0 - z + std_normal_cdf_log(b);
  const double xa = x0 + z + std_normal_cdf_log(a);
  const double qdivp = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
  return 1.0 / (1.0 + qdivp);
}

// Inverse-Gaussian(1/z, 1) truncated to (0, kTrunc).
double truncated_inverse_gaussian(double z, Rng& rng) {
  const double r = kTrunc;
  z = std::abs(z);
  const double mu = 1.0 / z;
  double x = r + 1.0;
  if (mu > r) {
    double alpha = 0.0;
    while (rng.uniform() > alpha) {
      double e1 = rng.exponential();
      double e2 = rng.exponential();
      while (e1 * e1 > 2.0 * e2 / r) {
        e1 = rng.exponential();
        e2 = rng.exponential();
      }
      x = r / square(1.0 + r * e1);
      alpha = std::exp(-0.5 * z * z * x);
    }
  } else {
    while (x > r) {
      const double y = square(rng.normal());
      const double mu_y = mu * y;
      x = mu + 0.5 * mu * mu_y - 0.5 * mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
      if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
    }
  }
  return x;
}

}  // namespace

double pg_sample(double c, Rng& rng) {
  if (!std::isfinite(c)) throw ConfigError("pg_sample: c must be finite");
  // PG(1, c) = J*(1, c/2) / 4.
  const double z = std::abs(c) * 0.5;
  const double fz = kPi * kPi / 8.0 + z * z / 2.0;
  const double p_exp = mass_texpon(z);
  for (;;) {
    double x;
    if (rng.uniform() < p_exp) {
      x = kTrunc + rng.exponential() / fz;
    } else {
      x = truncated_inverse_gaussian(z, rng);
    }
    double s = series_coef(0, x);
    const double y = rng.uniform() * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= series_coef(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += series_coef(n, x);
        if (y > s) break;
      }
    }
  }
}

double pg_mean_series(double c, int terms) {
  // E[PG(1,c)] = (1/(2 pi^2)) sum_k 1 / ((k - 1/2)^2 + c^2 / (4 pi^2)).
  double sum = 0.0;
  const double c2 = c * c / (4.0 * kPi * kPi);
  for (int k = terms; k >= 1; --k) sum += 1.0 / (square(k - 0.5) + c2);
  // Tail beyond `terms` behaves like 1/k^2.
  sum += 1.0 / terms;
  return sum / (2.0 * kPi * kPi);
}

void validate_binary_labels(const Dataset& data) {
  for (Eigen::Index i = 0; i < data.y.size(); ++i)
    if (data.y[i] != 0.0 && data.y[i] != 1.0) throw ConfigError("logistic: labels must be 0 or 1");
}

namespace {

double log_prior(const Eigen::VectorXd& beta, const ModelIndicator& z, const Prior& prior) {
  double v = 0.0;
  for (int j = 0; j < z.size(); ++j) {
    const double b2 = beta[j] * beta[j];
    if (z[j]) {
      v += std::log(prior.q) - kLogSqrt2Pi - std::log(prior.tau1) - b2 / (2.0 * square(prior.tau1));
    } else {
      v += std::log1p(-prior.q) - kLogSqrt2Pi - std::log(prior.tau0) - b2 / (2.0 * square(prior.tau0));
    }
  }
  return v;
}

Eigen::VectorXd linear_predictor(const Eigen::VectorXd& beta, const ModelIndicator& z,
                                 const Dataset& data) {
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(data.n());
  for (int j : z.active_indices()) psi += beta[j] * data.X.col(j);
  return psi;
}

double site_logit(double beta_j, const Eigen::Ref<const Eigen::VectorXd>& xj,
                  const Eigen::VectorXd& partial_psi, const Eigen::VectorXd& kappa,
                  const Eigen::VectorXd& omega, const Prior& prior) {
  const double b2 = beta_j * beta_j;
  // Change of sum_i [kappa_i psi_i - omega_i psi_i^2 / 2] when x_j beta_j is added.
  const Eigen::ArrayXd with = partial_psi.array() + beta_j * xj.array();
  const double dlik = beta_j * xj.dot(kappa) -
                      0.5 * (omega.array() * (with.square() - partial_psi.array().square())).sum();
  return prior.log_prior_odds() + std::log(prior.tau0 / prior.tau1) -
         0.5 * (1.0 / square(prior.tau1) - 1.0 / square(prior.tau0)) * b2 + dlik;
}

}  // namespace

double logistic_augmented_log_density(const LogisticState& state, const Dataset& data,
                                      const Prior& prior) {
  const Eigen::VectorXd psi = linear_predictor(state.beta, state.z, data);
  const Eigen::ArrayXd kappa = data.y.array() - 0.5;
  return (kappa * psi.array() - 0.5 * state.omega.array() * psi.array().square()).sum() +
         log_prior(state.beta, state.z, prior);
}

double logistic_log_posterior(const Eigen::VectorXd& beta, const ModelIndicator& z,
                              const Dataset& data, const Prior& prior) {
  const Eigen::VectorXd psi = linear_predictor(beta, z, data);
  double v = 0.0;
  for (Eigen::Index i = 0; i < psi.size(); ++i) {
    const double s = psi[i];
    // log(1 + e^s) computed stably
    const double softplus = s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
    v += data.y[i] * s - softplus;
  }
  return v + log_prior(beta, z, prior);
}

double logistic_site_logit(int j, const LogisticState& state, const Dataset& data,
                           const Prior& prior) {
  ModelIndicator without = state.z;
  without.set(j, false);
  const Eigen::VectorXd partial = linear_predictor(state.beta, without, data);
  const Eigen::VectorXd kappa = data.y.array() - 0.5;
  return site_logit(state.beta[j], data.X.col(j), partial, kappa, state.omega, prior);
}

LogisticState logistic_gibbs_sweep(LogisticState state, const Dataset& data, const Prior& prior,
                                   Rng& rng) {
  const int n = data.n();
  const int p = data.p();
  if (state.beta.size() != p || state.z.size() != p || state.omega.size() != n)
    throw DimensionError("logistic: state dimension mismatch");
  const Eigen::VectorXd kappa = data.y.array() - 0.5;

  // beta | z, omega, y
  const auto active = state.z.active_indices();
  const auto k = static_cast<Eigen::Index>(active.size());
  if (k > 0) {
    const Eigen::MatrixXd Xz = select_columns(data.X, active);
    Eigen::MatrixXd prec = Xz.transpose() * state.omega.asDiagonal() * Xz;
    prec.diagonal().array() += 1.0 / square(prior.tau1);
    Eigen::LLT<Eigen::MatrixXd> llt(prec);
    if (llt.info() != Eigen::Success) throw NumericalError("logistic: precision factorization failed");
    const Eigen::VectorXd mean = llt.solve(Xz.transpose() * kappa);
    const Eigen::VectorXd xi = rng.normal_vector(k);
    const Eigen::VectorXd draw = mean + llt.matrixU().solve(xi);
    for (Eigen::Index c = 0; c < k; ++c) state.beta[active[c]] = draw[c];
  }
  for (int j = 0; j < p; ++j)
    if (!state.z[j]) state.beta[j] = prior.tau0 * rng.normal();

  // omega | beta, z
  Eigen::VectorXd psi = linear_predictor(state.beta, state.z, data);
  for (int i = 0; i < n; ++i) state.omega[i] = pg_sample(psi[i], rng);

  // z_j | beta, omega, z_-j, ascending
  for (int j = 0; j < p; ++j) {
    const auto xj = data.X.col(j);
    Eigen::VectorXd partial = psi;
    if (state.z[j]) partial -= state.beta[j] * xj;
    const double lg = site_logit(state.beta[j], xj, partial, kappa, state.omega, prior);
    const bool on = rng.uniform() < sigmoid(lg);
    state.z.set(j, on);
    psi = on ? Eigen::VectorXd(partial + state.beta[j] * xj) : partial;
  }
  return state;
}

LogisticState logistic_initial_state(const Dataset& data, const ModelIndicator& z) {
  LogisticState s;
  s.beta = Eigen::VectorXd::Zero(data.p());
  s.z = z;
  s.omega = Eigen::VectorXd::Constant(data.n(), 0.25);
  return s;
}

std::vector<LogisticSample> logistic_run(const Dataset& data, const Prior& prior,
                                         const GibbsConfig& config, LogisticState init) {
  config.validate();
  validate_binary_labels(data);
  if (prior.sigma != 1.0)
    std::clog << "warning: logistic sampler ignores prior.sigma (fixed at 1)\n";
  Rng rng(config.seed);
  std::vector<LogisticSample> out;
  LogisticState state = std::move(init);
  for (long s = 1; s <= config.sweeps; ++s) {
    if (config.lazy && rng.uniform() < 0.5) {
      // hold
    } else {
      state = logistic_gibbs_sweep(std::move(state), data, prior, rng);
    }
    if (s > config.burn_in && (s - config.burn_in) % config.thin == 0) {
      out.push_back({s, state, logistic_log_posterior(state.beta, state.z, data, prior)});
    }
  }
  return out;
}

}  // namespace sslab
