#pragma once

#include <functional>

#include <Eigen/Dense>

#include "sslab/model.hpp"
#include "sslab/rng.hpp"

namespace sslab {

struct CacheConfig {
  int max_flips = 4;       // Sherman-Morrison batch limit before a rebuild
  int rebuild_every = 64;  // forced rebuild period, in updates
};

// Explicit inverse of M = I_n + X_z D^{-1} X_z^T for the current z.
//
// The inverse is always stored as the inverse built at the last full rebuild
// (the base) corrected by rank-1 Sherman-Morrison terms for the columns that
// differ from the base model. Returning to the base model restores the base
// inverse exactly.
class LowRankCache {
 public:
  // `column_weight[j]` is the j-th diagonal entry of D^{-1}.
  LowRankCache(const Dataset& data, Eigen::VectorXd column_weight, CacheConfig config = {});
  // D^{-1} = (tau1^2 / sigma^2) I.
  LowRankCache(const Dataset& data, const Prior& prior, CacheConfig config = {});

  void rebuild(const ModelIndicator& z);
  // Advance to z_new (cache_update).
  void update(const ModelIndicator& z_new);
  // Rebuild at `base`, move to z and set the generation counter, so a resumed
  // cache follows the same rebuild schedule as the original.
  void restore(const ModelIndicator& base, const ModelIndicator& z, int generation);

  const ModelIndicator& z() const { return z_; }
  const ModelIndicator& base_z() const { return base_z_; }
  const Eigen::MatrixXd& inverse() const { return inv_; }
  const Eigen::VectorXd& column_weight() const { return weight_; }
  const CacheConfig& config() const { return config_; }
  int generation() const { return generation_; }
  long rebuild_count() const { return rebuilds_; }
  long low_rank_count() const { return low_rank_updates_; }
  bool initialized() const { return z_.size() > 0; }

  // M for the current z, formed densely (for checks).
  Eigen::MatrixXd reconstruct() const;
  Eigen::VectorXd apply_m(const Eigen::VectorXd& v) const;
  Eigen::VectorXd apply_inverse(const Eigen::VectorXd& v) const { return inv_ * v; }
  // max |M M^{-1} v - v| over random probes.
  double coherence_error(Rng& rng, int probes = 4) const;

 private:
  void restore_from_base(const ModelIndicator& z_new);

  const Dataset* data_;
  Eigen::VectorXd weight_;
  CacheConfig config_;
  ModelIndicator z_;
  ModelIndicator base_z_;
  Eigen::MatrixXd base_inv_;
  Eigen::MatrixXd inv_;
  int generation_ = 0;
  long rebuilds_ = 0;
  long low_rank_updates_ = 0;
};

using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct CgResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double relative_residual = 0.0;
};

// Preconditioned conjugate gradient for SPD systems. Throws ConvergenceError
// (carrying the residual) if tol is not reached within max_iter.
CgResult cg_solve(const LinearOperator& apply_m, const Eigen::VectorXd& b,
                  const LinearOperator& precond, double tol, int max_iter);

enum class GaussianSolver { kCachedInverse, kConjugateGradient };

struct GaussianSamplerOptions {
  GaussianSolver solver = GaussianSolver::kCachedInverse;
  double cg_tol = 1e-12;
  int cg_max_iter = 500;
};

// Draw the active block of beta | z, y ~ N(Sigma^{-1} Xz^T y, sigma^2 Sigma^{-1})
// by data augmentation: r ~ N(0, D^{-1}), zeta ~ N(0, I_n), v = Xz r + zeta,
// u = M^{-1}(y/sigma - v), beta = sigma (r + D^{-1} Xz^T u).
// With the cached-inverse solver the cache is advanced to z first; with the
// CG solver the cache (still at the previous z) serves as preconditioner and
// is advanced afterwards.
Eigen::VectorXd sample_active_gaussian(const ModelIndicator& z, const Dataset& data,
                                       const Prior& prior, LowRankCache& cache, Rng& rng,
                                       const GaussianSamplerOptions& options = {});

}  // namespace sslab
