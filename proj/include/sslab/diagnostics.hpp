#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sslab/model.hpp"
#include "sslab/rng.hpp"

namespace sslab {

// Empirical model frequencies as a table over the distinct models seen.
PosteriorTable empirical_table(std::span<const ModelIndicator> samples);

// Half the l1 distance between the empirical law of `samples` and `table`.
double z_tv(std::span<const ModelIndicator> samples, const PosteriorTable& table);
double table_tv(const PosteriorTable& a, const PosteriorTable& b);

Eigen::VectorXd inclusion_probs(std::span<const ModelIndicator> samples);

// Rows of `outputs` mapped to models by |x_j| > threshold.
std::vector<ModelIndicator> threshold_models(const Eigen::MatrixXd& outputs, double threshold);

// Crossover of the spike and slab prior densities:
// b^2 = 2 log((1-q) tau1 / (q tau0)) / (1/tau0^2 - 1/tau1^2). Requires tau0 < tau1.
double spike_slab_crossover(const Prior& prior);
// Half of c sigma sqrt(log p / n).
double half_beta_min_threshold(int n, int p, double sigma, double c = 2.0);

// Exact quadratic Wasserstein distance between two empirical laws on the line
// (quantile coupling; equal sizes reduce to matching order statistics).
double w2_1d(std::span<const double> a, std::span<const double> b);

// Effective sample size, Geyer initial monotone sequence estimator.
double ess(std::span<const double> series);

// Exact W2 between two equal-size point clouds (rows), by optimal assignment.
double w2_assignment(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int max_points = 512);
// Average over random directions of the squared 1-d W2, square-rooted.
double w2_sliced(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int directions, Rng& rng);
// W2 between Gaussians N(m1, S1) and N(m2, S2).
double w2_gaussian(const Eigen::VectorXd& m1, const Eigen::MatrixXd& S1, const Eigen::VectorXd& m2,
                   const Eigen::MatrixXd& S2);
// W2 between Gaussian fits of the sample cloud and N(m, S).
double w2_gaussian_fit(const Eigen::MatrixXd& samples, const Eigen::VectorXd& m, const Eigen::MatrixXd& S);

struct MeanCov {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};
MeanCov sample_mean_cov(const Eigen::MatrixXd& rows);

// Posterior mass inside the contraction ball around the truth, by sampling
// beta | z for each table model. Ball: |beta_z - beta*_z| <= r_active and
// |beta_{1-z}| <= r_inactive.
double ball_mass(const PosteriorTable& table, const Dataset& data, const Prior& prior,
                 double r_active, double r_inactive, int draws_per_model, Rng& rng,
                 double mass_cutoff = 1e-8);

struct Replication {
  PosteriorTable table;
  ModelIndicator z_star;
  int k = 0;
  double delta = 1.0;
  double ball_mass = -1.0;  // negative: not measured
  bool from_sampler = false;
};

struct BandedMean {
  double mean = 0.0;
  double lo = 0.0;  // mean -/+ 1.96 standard errors
  double hi = 0.0;
  int count = 0;
};

struct ContractionReport {
  BandedMean truth_mass;       // pi(z* | y)
  BandedMean large_mass;       // pi(|z| > k (1 + 1/delta) | y)
  BandedMean ball;             // mass in the contraction ball
  int replications = 0;
  int truth_mass_above_09 = 0;
  int sampler_estimates = 0;   // replications using sampler tables
  std::vector<double> per_replication_truth_mass;
};

ContractionReport contraction_report(const std::vector<Replication>& runs);

void write_contraction_csv(std::ostream& os, const ContractionReport& r);
std::string format_contraction_text(const ContractionReport& r);

}  // namespace sslab
