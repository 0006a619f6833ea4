#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sslab/model.hpp"
#include "sslab/rng.hpp"

namespace sslab {

// Observation process theta_t = t beta + W_t at time t.
struct LocalizationState {
  Eigen::VectorXd theta;
  double t = 0.0;
};

// Candidate models for the approximate drift: supersets of `base`.
struct WarmStartSet {
  std::vector<ModelIndicator> models;
  ModelIndicator base;
  int max_extra = 0;

  void validate() const;
};

// All supersets of base adding at most max_extra columns from `pool`
// (pool entries already in base are ignored).
WarmStartSet make_warm_start_set(const ModelIndicator& base, std::span<const int> pool,
                                 int max_extra);
// Every model on p coordinates (p <= 16).
WarmStartSet full_model_set(int p);

struct SlocConfig {
  double horizon = 64.0;  // T
  double step = 0.01;     // h
  int mc_paths = 1000;
  std::uint64_t seed = 1;
  int jobs = 1;  // worker threads; results do not depend on it

  void validate() const;
  long steps() const;  // K = T / h
};

struct TiltedComponent {
  Eigen::VectorXd v;  // tilted mean of the z-component
  double log_c = 0.0;
};

// Mean and log-weight of the z-component of the tilted measure,
// evaluated directly with a Cholesky solve.
TiltedComponent tilted_component(const ModelIndicator& z, const LocalizationState& state,
                                 const Dataset& data, const Prior& prior);

// Mixture of tilted components over S with log-sum-exp weights; direct
// (uncached) evaluation.
Eigen::VectorXd sl_drift(const LocalizationState& state, const WarmStartSet& S,
                         const Dataset& data, const Prior& prior);

// Drift evaluator with per-model spectral caches of Xz^T Xz / sigma^2, so each
// evaluation costs O(|S| k^2 + p) regardless of t.
class DriftEngine {
 public:
  DriftEngine(const Dataset& data, const Prior& prior, const WarmStartSet& S);

  // Scratch buffers so the inner loop does not allocate.
  struct Workspace {
    Eigen::VectorXd log_c;
    Eigen::MatrixXd v_active;  // max_k x |S|
    Eigen::VectorXd tmp;
  };
  Workspace workspace() const;

  Eigen::VectorXd drift(const Eigen::VectorXd& theta, double t) const;
  // Writes the drift into `out`; optionally reports the heaviest model.
  void drift_into(const Eigen::VectorXd& theta, double t, Workspace& ws, Eigen::VectorXd& out,
                  std::size_t* top_model = nullptr, double* top_weight = nullptr) const;
  TiltedComponent component(std::size_t i, const Eigen::VectorXd& theta, double t) const;

  std::size_t size() const { return models_.size(); }
  int p() const { return p_; }

 private:
  struct Cached {
    std::vector<int> active;
    Eigen::MatrixXd eigvecs;
    Eigen::VectorXd eigvals;
    Eigen::VectorXd xty;  // Xz^T y / sigma^2
    double log_prior_factor = 0.0;
  };
  int p_;
  Prior prior_;
  std::vector<Cached> models_;
  Eigen::Index max_k_ = 0;
};

struct SlocTraceRow {
  int path = 0;
  double t = 0.0;
  double drift_norm = 0.0;
  std::size_t top_model = 0;
  double top_weight = 0.0;
};

struct SlocOptions {
  bool check_convex = false;  // assert componentwise drift bounds each step
  bool trace = false;
  long trace_every = 100;
};

struct SlocResult {
  Eigen::MatrixXd outputs;  // mc_paths x p, row = a_hat(beta_K, K h)
  std::vector<SlocTraceRow> trace;
  double wall_seconds = 0.0;
};

// Euler-Maruyama on d theta = a_hat(theta, t) dt + dW from theta = 0;
// each path returns a_hat(theta_K, K h). Path i uses Rng::stream(seed, i).
SlocResult sl_run(const Dataset& data, const Prior& prior, const WarmStartSet& S,
                  const SlocConfig& config, const SlocOptions& options = {});

struct MartingaleReport {
  std::vector<double> times;            // checkpoints, first is 0
  std::vector<Eigen::VectorXd> means;   // path mean of a_hat at each time
  std::vector<Eigen::VectorXd> std_errors;
  Eigen::VectorXd initial;              // a_hat(0, 0)
  std::vector<double> deviation_inf;    // |mean - initial|_inf
  std::vector<double> max_z_score;      // max_j |mean_j - initial_j| / se_j
  std::vector<Eigen::VectorXd> path_variance;  // across-path variance of a_hat
};

// Path means of a_hat at t in {0, T/4, T/2, T}.
MartingaleReport martingale_check(const Dataset& data, const Prior& prior, const WarmStartSet& S,
                                  const SlocConfig& config);

// Closed-form coordinate drifts for orthogonal designs. b_j = theta_j +
// x_j^T y / sigma^2 and the slab precision is t + |x_j|^2/sigma^2 + 1/tau1^2.
double ortho_drift_pointmass(int j, const LocalizationState& state, const Dataset& data,
                             const Prior& prior);
double ortho_drift_gaussian(int j, const LocalizationState& state, const Dataset& data,
                            const Prior& prior);

}  // namespace sslab
