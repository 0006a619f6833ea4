#pragma once

#include <functional>

#include <Eigen/Dense>

#include "sslab/gibbs.hpp"
#include "sslab/model.hpp"
#include "sslab/rng.hpp"

namespace sslab {

// Posterior with the Gaussian design integrated out; depends on y only.
struct RdTarget {
  Eigen::VectorXd y;
  Prior prior;
  double gamma = 0.0;  // reference variance, must exceed tau0^2

  RdTarget() = default;
  // gamma <= 0 selects the default 4 tau0^2.
  RdTarget(Eigen::VectorXd y, Prior prior, double gamma = 0.0);
  void validate() const;
  int n() const { return static_cast<int>(y.size()); }
};

// Unnormalized log pi(beta, z | y) after integrating X ~ N(0, 1)^{n x p}.
double rd_log_density(const Eigen::VectorXd& beta, const ModelIndicator& z, const RdTarget& target);

// Data term n log sigma - n/2 log(|b|^2 + sigma^2) + |y|^2 |b|^2 / (2 sigma^4 + 2 sigma^2 |b|^2).
double rd_log_likelihood(double beta_sq_norm, const RdTarget& target);

// P(z_j = 1 | beta_j).
double rd_inclusion_prob(double beta_j, const Prior& prior);
ModelIndicator rd_z_update(const Eigen::VectorXd& beta, const RdTarget& target, Rng& rng);

// log f for the beta | z step: the conditional density relative to N(0, gamma I).
double rd_log_f(const Eigen::VectorXd& beta, const ModelIndicator& z, const RdTarget& target);
// log pi(beta | z, y) up to a constant.
double rd_log_conditional(const Eigen::VectorXd& beta, const ModelIndicator& z,
                          const RdTarget& target);
// Hessian of -log pi(beta | z, y) by central differences.
Eigen::MatrixXd rd_neg_log_hessian(const Eigen::VectorXd& beta, const ModelIndicator& z,
                                   const RdTarget& target, double step = 1e-4);

using LogFunction = std::function<double(const Eigen::VectorXd&)>;

struct SbOptions {
  bool antithetic = true;  // pair each Z with -Z
  bool drift_off = false;  // plain Brownian motion, for checks
};

// Self-normalized estimate of E[Z f(x + c Z)] / (c E[f(x + c Z)]), c = sqrt(1 - t),
// Z ~ N(0, gamma I), with weights handled in log space.
Eigen::VectorXd sb_drift(const Eigen::VectorXd& x, double t, const LogFunction& log_f, double gamma,
                         int mc_samples, Rng& rng, const SbOptions& options = {});

// Euler-Maruyama on [0, 1] from X_0 = 0 with `steps` uniform steps.
Eigen::VectorXd sb_em_run(int p, const LogFunction& log_f, double gamma, int steps,
                          int mc_samples, Rng& rng, const SbOptions& options = {});
// Approximate draw from pi(beta | z, y).
Eigen::VectorXd sb_em_sample(const ModelIndicator& z, const RdTarget& target, int steps,
                             int mc_samples, Rng& rng, const SbOptions& options = {});

struct RdGibbsConfig {
  GibbsConfig gibbs;  // sweeps, burn_in, thin, seed
  int inner_steps = 100;
  int mc_samples = 256;

  void validate() const;
};

// Each sweep draws z | beta coordinatewise, then beta | z with the bridge sampler.
RunMetadata rd_gibbs_run(const RdTarget& target, const RdGibbsConfig& config,
                         const JointState& init, const SampleSink& sink);

}  // namespace sslab
