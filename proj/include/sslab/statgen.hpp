#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sslab/model.hpp"
#include "sslab/sloc.hpp"

namespace sslab {

enum class DesignKind { kGaussianIid, kOrthogonal, kCorrelated };

struct SyntheticSpec {
  int n = 100;
  int p = 10;
  int k = 2;
  double signal_scale = 4.0;  // in units of sigma sqrt(log p / n)
  DesignKind design = DesignKind::kGaussianIid;
  double rho = 0.99;                         // correlated design only
  std::vector<std::pair<int, int>> pairs;    // correlated column pairs
  std::vector<int> support;                  // empty: k indices drawn at random
  std::vector<double> signs;                 // empty: random signs, else +-1 per support entry
  bool normalize_columns = true;             // |X_j|^2 = n
  double sigma = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

Dataset gen_synthetic(const SyntheticSpec& spec);

// q/(1-q) = p^-(delta+1), tau1 = sigma p / sqrt(n), tau0 = sigma / sqrt(n).
Prior suggest_prior(int n, int p, double sigma, double delta);

struct LassoOptions {
  double tol = 1e-8;  // duality gap relative to max(1, |y|^2)
  int max_passes = 100000;
};

struct LassoResult {
  Eigen::VectorXd beta;
  double duality_gap = 0.0;  // for |y - X b|^2 + lambda |b|_1
  int passes = 0;
  std::vector<int> support() const;  // |beta_j| > 1e-10
};

// Coordinate descent for |y - X b|^2 + lambda |b|_1 (no 1/2 factor).
LassoResult lasso_fit(const Dataset& data, double lambda, const LassoOptions& options = {});
// Largest violation of the optimality conditions at beta.
double lasso_kkt_residual(const Dataset& data, double lambda, const Eigen::VectorXd& beta);
// 2 sigma sqrt(2 n log p).
double default_lasso_lambda(int n, int p, double sigma);

struct WarmStartOptions {
  double lambda = -1.0;  // negative: default_lasso_lambda
  int max_extra = 2;
  int top_m = 0;         // extra pool columns by marginal correlation |X_j^T y|
  bool use_truth = false;
};

struct WarmStart {
  JointState state;
  WarmStartSet set;
  std::vector<int> pool;  // candidate additions outside the base
  std::optional<LassoResult> lasso;
};

WarmStart warm_start(const Dataset& data, const Prior& prior, const WarmStartOptions& options = {});

struct DesignStat {
  double value = 0.0;
  bool exhaustive = false;
  ModelIndicator argmin_z;  // support attaining the value
};

// Every support with at most k active coordinates.
std::vector<ModelIndicator> all_supports_up_to(int p, int k);

// Coherence C(k) maximized over the supports in `pool` (|z| <= k each).
DesignStat coherence(const Dataset& data, const Prior& prior, int k,
                     const std::vector<ModelIndicator>& pool);
// Restricted eigenvalue omega(k) minimized over the supports in `pool`.
DesignStat restricted_eig(const Dataset& data, const Prior& prior, int k,
                          const std::vector<ModelIndicator>& pool);
// Exhaustive versions; GuardError beyond p = 12 or k = 3.
DesignStat coherence_exhaustive(const Dataset& data, const Prior& prior, int k);
DesignStat restricted_eig_exhaustive(const Dataset& data, const Prior& prior, int k);

struct BetaMinReport {
  bool pass = false;
  double margin = 0.0;  // min active |beta*_j| / (c sigma sqrt(log p / n))
  double c = 2.0;
  double threshold = 0.0;  // c sigma sqrt(log p / n)
  double inactive_norm = 0.0;
};

BetaMinReport beta_min_check(const Dataset& data, const Prior& prior, double c = 2.0);

}  // namespace sslab
