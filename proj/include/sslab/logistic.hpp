#pragma once

#include <vector>

#include <Eigen/Dense>

#include "sslab/gibbs.hpp"
#include "sslab/model.hpp"
#include "sslab/rng.hpp"

namespace sslab {

// Exact draw from PG(1, c) (Devroye-type alternating-series rejection).
double pg_sample(double c, Rng& rng);

// Truncated-series mean of PG(1, c); test oracle and documentation aid.
double pg_mean_series(double c, int terms = 100000);

struct LogisticState {
  Eigen::VectorXd beta;
  ModelIndicator z;
  Eigen::VectorXd omega;  // Polya-Gamma auxiliaries, all > 0
};

// The logistic module fixes the noise scale at 1; prior.sigma is not used.
// Labels y must be 0/1.
void validate_binary_labels(const Dataset& data);

// log of the augmented joint in (beta, z) for fixed omega:
// sum_i [(y_i - 1/2) psi_i - omega_i psi_i^2 / 2] + log prior(beta, z),
// psi = X_z beta_z. Omega-only factors are dropped.
double logistic_augmented_log_density(const LogisticState& state, const Dataset& data,
                                      const Prior& prior);

// Un-augmented log posterior numerator:
// sum_i [y_i psi_i - log(1 + e^psi_i)] + log prior(beta, z).
double logistic_log_posterior(const Eigen::VectorXd& beta, const ModelIndicator& z,
                              const Dataset& data, const Prior& prior);

// log-odds of z_j = 1 vs 0 given beta, omega and z_-j.
double logistic_site_logit(int j, const LogisticState& state, const Dataset& data,
                           const Prior& prior);

// beta | z, omega; then omega_i | beta, z ~ PG(1, x_{i,z}^T beta_z); then the
// sequential z_j scan.
LogisticState logistic_gibbs_sweep(LogisticState state, const Dataset& data, const Prior& prior,
                                   Rng& rng);

struct LogisticSample {
  long sweep = 0;
  LogisticState state;
  double log_density = 0.0;  // un-augmented log posterior numerator
};

std::vector<LogisticSample> logistic_run(const Dataset& data, const Prior& prior,
                                         const GibbsConfig& config, LogisticState init);

LogisticState logistic_initial_state(const Dataset& data, const ModelIndicator& z);

}  // namespace sslab
