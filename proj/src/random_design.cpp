#include "sslab/random_design.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "sslab/error.hpp"
#include "sslab/numeric.hpp"

namespace sslab {

namespace {

constexpr double kTimeClip = 1.0 - 1e-9;

double prior_log_terms(const Eigen::VectorXd& beta, const ModelIndicator& z, const Prior& prior) {
  const double lq = std::log(prior.q), l1q = std::log1p(-prior.q);
  double out = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double b2 = beta[j] * beta[j];
    if (z[static_cast<int>(j)]) {
      out += lq - std::log(prior.tau1) - kLogSqrt2Pi - 0.5 * b2 / square(prior.tau1);
    } else {
      out += l1q - std::log(prior.tau0) - kLogSqrt2Pi - 0.5 * b2 / square(prior.tau0);
    }
  }
  return out;
}

void check_dims(const Eigen::VectorXd& beta, const ModelIndicator& z) {
  if (beta.size() != z.size()) throw DimensionError("random design: beta and z lengths differ");
}

}  // namespace

RdTarget::RdTarget(Eigen::VectorXd y_, Prior prior_, double gamma_)
    : y(std::move(y_)), prior(prior_), gamma(gamma_ > 0.0 ? gamma_ : 4.0 * prior_.tau0 * prior_.tau0) {
  validate();
}

void RdTarget::validate() const {
  prior.validate();
  if (y.size() <= 2) throw ConfigError("random design: need n > 2");
  if (!(gamma > prior.tau0 * prior.tau0)) throw ConfigError("random design: need gamma > tau0^2");
  if (!y.allFinite()) throw ConfigError("random design: y must be finite");
}

double rd_log_likelihood(double beta_sq_norm, const RdTarget& target) {
  const double s2 = square(target.prior.sigma);
  const double n = target.n();
  return n * std::log(target.prior.sigma) - 0.5 * n * std::log(beta_sq_norm + s2) +
         target.y.squaredNorm() * beta_sq_norm / (2.0 * s2 * (s2 + beta_sq_norm));
}

double rd_log_density(const Eigen::VectorXd& beta, const ModelIndicator& z, const RdTarget& target) {
  check_dims(beta, z);
  return rd_log_likelihood(beta.squaredNorm(), target) + prior_log_terms(beta, z, target.prior);
}

double rd_inclusion_prob(double beta_j, const Prior& prior) {
  // logit Q = log(q/(1-q)) + log(tau0/tau1) - (1/tau1^2 - 1/tau0^2) beta^2 / 2
  const double logit = prior.log_prior_odds() + std::log(prior.tau0 / prior.tau1) -
                       0.5 * (1.0 / square(prior.tau1) - 1.0 / square(prior.tau0)) * beta_j * beta_j;
  return sigmoid(logit);
}

ModelIndicator rd_z_update(const Eigen::VectorXd& beta, const RdTarget& target, Rng& rng) {
  ModelIndicator z(static_cast<int>(beta.size()));
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    z.set(static_cast<int>(j), rng.bernoulli(rd_inclusion_prob(beta[j], target.prior)));
  return z;
}

double rd_log_f(const Eigen::VectorXd& beta, const ModelIndicator& z, const RdTarget& target) {
  check_dims(beta, z);
  const double b2 = beta.squaredNorm();
  double quad = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    quad += square(beta[j]) / square(z[static_cast<int>(j)] ? target.prior.tau1 : target.prior.tau0);
  return rd_log_likelihood(b2, target) - 0.5 * quad + b2 / (2.0 * target.gamma);
}

double rd_log_conditional(const Eigen::VectorXd& beta, const ModelIndicator& z,
                          const RdTarget& target) {
  return rd_log_f(beta, z, target) - beta.squaredNorm() / (2.0 * target.gamma);
}

Eigen::MatrixXd rd_neg_log_hessian(const Eigen::VectorXd& beta, const ModelIndicator& z,
                                   const RdTarget& target, double step) {
  const auto p = beta.size();
  auto fn = [&](const Eigen::VectorXd& b) { return -rd_log_conditional(b, z, target); };
  Eigen::MatrixXd H(p, p);
  const double f0 = fn(beta);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i; j < p; ++j) {
      Eigen::VectorXd b = beta;
      double v;
      if (i == j) {
        b[i] += step;
        const double fp = fn(b);
        b[i] -= 2 * step;
        v = (fp - 2 * f0 + fn(b)) / (step * step);
      } else {
        b[i] += step; b[j] += step;
        const double fpp = fn(b);
        b[j] -= 2 * step;
        const double fpm = fn(b);
        b[i] -= 2 * step;
        const double fmm = fn(b);
        b[j] += 2 * step;
        const double fmp = fn(b);
        v = (fpp - fpm - fmp + fmm) / (4 * step * step);
      }
      H(i, j) = H(j, i) = v;
    }
  }
  return H;
}

Eigen::VectorXd sb_drift(const Eigen::VectorXd& x, double t, const LogFunction& log_f, double gamma,
                         int mc_samples, Rng& rng, const SbOptions& options) {
  if (!(t >= 0.0 && t < 1.0)) throw ConfigError("sb_drift: need 0 <= t < 1");
  if (mc_samples < 1) throw ConfigError("sb_drift: need at least one sample");
  const auto p = x.size();
  if (options.drift_off) return Eigen::VectorXd::Zero(p);
  const double c = std::sqrt(1.0 - t);
  const double sd = std::sqrt(gamma);

  Eigen::MatrixXd Z(p, mc_samples);
  int s = 0;
  while (s < mc_samples) {
    for (Eigen::Index j = 0; j < p; ++j) Z(j, s) = sd * rng.normal();
    if (options.antithetic && s + 1 < mc_samples) {
      Z.col(s + 1) = -Z.col(s);
      s += 2;
    } else {
      s += 1;
    }
  }
  std::vector<double> lw(static_cast<std::size_t>(mc_samples));
  double max_lw = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd u(p);
  for (int i = 0; i < mc_samples; ++i) {
    u = x + c * Z.col(i);
    const double v = log_f(u);
    lw[static_cast<std::size_t>(i)] = std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
    max_lw = std::max(max_lw, lw[static_cast<std::size_t>(i)]);
  }
  if (!std::isfinite(max_lw))
    throw NumericalError(
        "sb_drift: all importance weights underflow; shift the working exponent or rescale f");
  Eigen::VectorXd num = Eigen::VectorXd::Zero(p);
  double den = 0.0;
  for (int i = 0; i < mc_samples; ++i) {
    const double w = std::exp(lw[static_cast<std::size_t>(i)] - max_lw);
    num += w * Z.col(i);
    den += w;
  }
  return num / (c * den);
}

Eigen::VectorXd sb_em_run(int p, const LogFunction& log_f, double gamma, int steps,
                          int mc_samples, Rng& rng, const SbOptions& options) {
  if (steps < 1) throw ConfigError("sb_em: need at least one step");
  const double h = 1.0 / steps;
  const double noise = std::sqrt(gamma * h);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
  for (int k = 0; k < steps; ++k) {
    const double t = std::min(k * h, kTimeClip);
    const Eigen::VectorXd b = sb_drift(x, t, log_f, gamma, mc_samples, rng, options);
    for (int j = 0; j < p; ++j) x[j] += h * b[j] + noise * rng.normal();
  }
  return x;
}

Eigen::VectorXd sb_em_sample(const ModelIndicator& z, const RdTarget& target, int steps,
                             int mc_samples, Rng& rng, const SbOptions& options) {
  auto log_f = [&](const Eigen::VectorXd& b) { return rd_log_f(b, z, target); };
  return sb_em_run(z.size(), log_f, target.gamma, steps, mc_samples, rng, options);
}

void RdGibbsConfig::validate() const {
  gibbs.validate();
  if (inner_steps < 1) throw ConfigError("rd-gibbs: inner_steps must be >= 1");
  if (mc_samples < 1) throw ConfigError("rd-gibbs: mc_samples must be >= 1");
}

RunMetadata rd_gibbs_run(const RdTarget& target, const RdGibbsConfig& config,
                         const JointState& init, const SampleSink& sink) {
  target.validate();
  config.validate();
  check_dims(init.beta, init.z);
  const auto start = std::chrono::steady_clock::now();
  Rng rng(config.gibbs.seed);
  JointState state = init;
  RunMetadata meta;
  const auto& g = config.gibbs;
  for (long s = 1; s <= g.sweeps; ++s) {
    state.z = rd_z_update(state.beta, target, rng);
    state.beta = sb_em_sample(state.z, target, config.inner_steps, config.mc_samples, rng);
    ++meta.steps;
    if (s > g.burn_in && (s - g.burn_in) % g.thin == 0 && sink)
      sink({s, state, rd_log_density(state.beta, state.z, target)});
  }
  meta.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return meta;
}

}  // namespace sslab
