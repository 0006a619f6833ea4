#include "sslab/linalg.hpp"

#include <cmath>
#include <sstream>

#include "sslab/error.hpp"

namespace sslab {

LowRankCache::LowRankCache(const Dataset& data, Eigen::VectorXd column_weight, CacheConfig config)
    : data_(&data), weight_(std::move(column_weight)), config_(config) {
  if (weight_.size() != data.p()) throw DimensionError("cache: weight length differs from p");
  if ((weight_.array() <= 0.0).any()) throw ConfigError("cache: weights must be positive");
  if (config_.max_flips < 0 || config_.rebuild_every < 1) throw ConfigError("cache: bad config");
}

LowRankCache::LowRankCache(const Dataset& data, const Prior& prior, CacheConfig config)
    : LowRankCache(data, Eigen::VectorXd::Constant(data.p(), prior.slab_weight()), config) {}

void LowRankCache::rebuild(const ModelIndicator& z) {
  if (z.size() != data_->p()) throw DimensionError("cache: model length differs from p");
  const int n = data_->n();
  const auto active = z.active_indices();
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
  if (!active.empty()) {
    Eigen::MatrixXd Xw = select_columns(data_->X, active);
    Eigen::MatrixXd Xs = Xw;
    for (std::size_t c = 0; c < active.size(); ++c)
      Xs.col(static_cast<Eigen::Index>(c)) *= weight_[active[c]];
    M.noalias() += Xs * Xw.transpose();
  }
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) throw NumericalError("cache: factorization of M failed");
  base_inv_ = llt.solve(Eigen::MatrixXd::Identity(n, n));
  base_inv_ = 0.5 * (base_inv_ + base_inv_.transpose()).eval();
  inv_ = base_inv_;
  base_z_ = z;
  z_ = z;
  generation_ = 0;
  ++rebuilds_;
}

void LowRankCache::restore_from_base(const ModelIndicator& z_new) {
  inv_ = base_inv_;
  for (int j = 0; j < z_new.size(); ++j) {
    if (z_new[j] == base_z_[j]) continue;
    const double s = z_new[j] ? weight_[j] : -weight_[j];
    const Eigen::VectorXd u = inv_ * data_->X.col(j);
    const double denom = 1.0 + s * data_->X.col(j).dot(u);
    if (!(denom > 0.0) || !std::isfinite(denom))
      throw NumericalError("cache: non-positive Sherman-Morrison denominator");
    inv_.noalias() -= (s / denom) * u * u.transpose();
    ++low_rank_updates_;
  }
}

void LowRankCache::update(const ModelIndicator& z_new) {
  if (!initialized()) {
    rebuild(z_new);
    return;
  }
  if (z_new == z_) return;
  const int flips = z_.hamming(z_new);
  const int from_base = base_z_.hamming(z_new);
  if (flips > config_.max_flips || from_base > config_.max_flips ||
      generation_ + 1 >= config_.rebuild_every) {
    rebuild(z_new);
    return;
  }
  restore_from_base(z_new);
  if (!inv_.allFinite()) {
    rebuild(z_new);
    if (!inv_.allFinite()) throw NumericalError("cache: non-finite inverse after rebuild");
    return;
  }
  z_ = z_new;
  ++generation_;
}

void LowRankCache::restore(const ModelIndicator& base, const ModelIndicator& z, int generation) {
  rebuild(base);
  if (!(z == base)) {
    restore_from_base(z);
    z_ = z;
  }
  generation_ = generation;
}

Eigen::MatrixXd LowRankCache::reconstruct() const {
  const int n = data_->n();
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
  for (int j : z_.active_indices()) M.noalias() += weight_[j] * data_->X.col(j) * data_->X.col(j).transpose();
  return M;
}

Eigen::VectorXd LowRankCache::apply_m(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out = v;
  for (int j : z_.active_indices()) out += weight_[j] * data_->X.col(j).dot(v) * data_->X.col(j);
  return out;
}

double LowRankCache::coherence_error(Rng& rng, int probes) const {
  double err = 0.0;
  for (int i = 0; i < probes; ++i) {
    const Eigen::VectorXd v = rng.normal_vector(data_->n());
    err = std::max(err, (apply_m(inv_ * v) - v).cwiseAbs().maxCoeff());
  }
  return err;
}

CgResult cg_solve(const LinearOperator& apply_m, const Eigen::VectorXd& b,
                  const LinearOperator& precond, double tol, int max_iter) {
  CgResult res;
  res.x = Eigen::VectorXd::Zero(b.size());
  const double bnorm = b.norm();
  if (bnorm == 0.0) return res;

  Eigen::VectorXd r = b;
  Eigen::VectorXd zv = precond ? precond(r) : r;
  Eigen::VectorXd p = zv;
  double rz = r.dot(zv);
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXd Ap = apply_m(p);
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) throw ConvergenceError("cg_solve: operator is not positive definite", r.norm() / bnorm);
    const double alpha = rz / pAp;
    res.x += alpha * p;
    r -= alpha * Ap;
    res.iterations = it;
    res.relative_residual = r.norm() / bnorm;
    if (res.relative_residual <= tol) return res;
    zv = precond ? precond(r) : r;
    const double rz_new = r.dot(zv);
    p = zv + (rz_new / rz) * p;
    rz = rz_new;
  }
  // Report the true residual, not the recursively updated one.
  const double true_res = (b - apply_m(res.x)).norm() / bnorm;
  if (true_res <= tol) {
    res.relative_residual = true_res;
    return res;
  }
  std::ostringstream os;
  os << "cg_solve: no convergence after " << max_iter << " iterations, relative residual " << true_res;
  throw ConvergenceError(os.str(), true_res);
}

Eigen::VectorXd sample_active_gaussian(const ModelIndicator& z, const Dataset& data,
                                       const Prior& prior, LowRankCache& cache, Rng& rng,
                                       const GaussianSamplerOptions& options) {
  if (z.size() != data.p()) throw DimensionError("sampler: model length differs from p");
  const auto active = z.active_indices();
  const auto k = static_cast<Eigen::Index>(active.size());
  const int n = data.n();
  const Eigen::VectorXd& dinv = cache.column_weight();

  Eigen::VectorXd r(k);
  for (Eigen::Index c = 0; c < k; ++c) r[c] = std::sqrt(dinv[active[c]]) * rng.normal();
  Eigen::VectorXd v = rng.normal_vector(n);
  for (Eigen::Index c = 0; c < k; ++c) v += r[c] * data.X.col(active[c]);
  const Eigen::VectorXd rhs = data.y / prior.sigma - v;

  Eigen::VectorXd u;
  if (options.solver == GaussianSolver::kCachedInverse) {
    cache.update(z);
    u = cache.inverse() * rhs;
    if (!u.allFinite()) {
      cache.rebuild(z);
      u = cache.inverse() * rhs;
      if (!u.allFinite()) throw NumericalError("sampler: non-finite solve after rebuild");
    }
  } else {
    if (!cache.initialized()) cache.rebuild(z);
    auto apply_m = [&](const Eigen::VectorXd& x) {
      Eigen::VectorXd out = x;
      for (Eigen::Index c = 0; c < k; ++c) {
        const auto col = data.X.col(active[c]);
        out += dinv[active[c]] * col.dot(x) * col;
      }
      return out;
    };
    auto precond = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(cache.inverse() * x); };
    u = cg_solve(apply_m, rhs, precond, options.cg_tol, options.cg_max_iter).x;
    cache.update(z);
  }

  Eigen::VectorXd beta(k);
  for (Eigen::Index c = 0; c < k; ++c)
    beta[c] = prior.sigma * (r[c] + dinv[active[c]] * data.X.col(active[c]).dot(u));
  return beta;
}

}  // namespace sslab
