#include "sslab/model.hpp"

#include <cmath>
#include <sstream>

#include "sslab/error.hpp"
#include "sslab/numeric.hpp"

namespace sslab {

Prior::Prior(double q_, double tau0_, double tau1_, double sigma_, double delta_)
    : q(q_), tau0(tau0_), tau1(tau1_), sigma(sigma_), delta(delta_) {
  validate();
}

void Prior::validate() const {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("prior: q must lie in (0,1)");
  if (!(tau0 > 0.0)) throw ConfigError("prior: tau0 must be positive");
  // tau0 == tau1 is admitted: it makes spike and slab indistinguishable.
  if (!(tau1 >= tau0)) throw ConfigError("prior: tau1 must be at least tau0");
  if (!(sigma > 0.0)) throw ConfigError("prior: sigma must be positive");
  if (!(delta >= 0.0)) throw ConfigError("prior: delta must be non-negative");
}

double Prior::log_prior_odds() const { return logit(q); }

ModelIndicator::ModelIndicator(int p, std::span<const int> active) : ModelIndicator(p) {
  for (int j : active) {
    if (j < 0 || j >= p) throw DimensionError("model indicator: index out of range");
    set(j, true);
  }
}

ModelIndicator ModelIndicator::from_mask(int p, std::uint64_t mask) {
  ModelIndicator z(p);
  for (int j = 0; j < p; ++j)
    if ((mask >> j) & 1ULL) z.set(j, true);
  return z;
}

ModelIndicator ModelIndicator::from_string(const std::string& bits) {
  ModelIndicator z(static_cast<int>(bits.size()));
  for (std::size_t j = 0; j < bits.size(); ++j) {
    if (bits[j] == '1') {
      z.set(static_cast<int>(j), true);
    } else if (bits[j] != '0') {
      throw ConfigError("model indicator: expected a 0/1 string, got '" + bits + "'");
    }
  }
  return z;
}

ModelIndicator ModelIndicator::all(int p) {
  ModelIndicator z(p);
  for (int j = 0; j < p; ++j) z.set(j, true);
  return z;
}

void ModelIndicator::set(int j, bool on) {
  auto& b = bits_[static_cast<std::size_t>(j)];
  if ((b != 0) == on) return;
  b = on ? 1 : 0;
  active_count_ += on ? 1 : -1;
}

std::vector<int> ModelIndicator::active_indices() const {
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(active_count_));
  for (int j = 0; j < size(); ++j)
    if ((*this)[j]) idx.push_back(j);
  return idx;
}

std::vector<int> ModelIndicator::inactive_indices() const {
  std::vector<int> idx;
  for (int j = 0; j < size(); ++j)
    if (!(*this)[j]) idx.push_back(j);
  return idx;
}

std::uint64_t ModelIndicator::to_mask() const {
  if (size() > 64) throw GuardError("model indicator: mask needs p <= 64");
  std::uint64_t m = 0;
  for (int j = 0; j < size(); ++j)
    if ((*this)[j]) m |= (1ULL << j);
  return m;
}

std::string ModelIndicator::to_string() const {
  std::string s(bits_.size(), '0');
  for (std::size_t j = 0; j < bits_.size(); ++j)
    if (bits_[j]) s[j] = '1';
  return s;
}

bool ModelIndicator::subset_of(const ModelIndicator& other) const {
  if (other.size() != size()) throw DimensionError("model indicator: size mismatch");
  for (int j = 0; j < size(); ++j)
    if ((*this)[j] && !other[j]) return false;
  return true;
}

int ModelIndicator::hamming(const ModelIndicator& other) const {
  if (other.size() != size()) throw DimensionError("model indicator: size mismatch");
  int d = 0;
  for (int j = 0; j < size(); ++j) d += ((*this)[j] != other[j]) ? 1 : 0;
  return d;
}

Dataset::Dataset(Eigen::MatrixXd X_, Eigen::VectorXd y_, std::optional<Truth> truth_)
    : X(std::move(X_)), y(std::move(y_)), truth(std::move(truth_)) {
  validate();
}

void Dataset::validate() const {
  if (y.size() != X.rows()) throw DimensionError("dataset: y length differs from rows of X");
  if (!truth) return;
  if (truth->beta_star.size() != X.cols() || truth->z_star.size() != p())
    throw DimensionError("dataset: truth dimension differs from columns of X");
  for (int j = 0; j < p(); ++j) {
    if ((truth->beta_star[j] != 0.0) != truth->z_star[j])
      throw ConfigError("dataset: support of beta_star differs from z_star");
  }
}

PosteriorTable::PosteriorTable(int p, std::vector<ModelIndicator> models,
                               std::vector<double> log_weights)
    : p_(p), models_(std::move(models)) {
  if (models_.size() != log_weights.size())
    throw DimensionError("posterior table: models and weights differ in length");
  log_norm_ = log_sum_exp(log_weights);
  if (!std::isfinite(log_norm_)) throw NumericalError("posterior table: non-finite normalizer");
  probs_.resize(log_weights.size());
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    probs_[i] = std::exp(log_weights[i] - log_norm_);
    index_.emplace(models_[i], i);
  }
  log_weights_ = std::move(log_weights);
}

double PosteriorTable::prob(const ModelIndicator& z) const {
  auto it = index_.find(z);
  return it == index_.end() ? 0.0 : probs_[it->second];
}

Eigen::VectorXd PosteriorTable::inclusion_probs() const {
  Eigen::VectorXd inc = Eigen::VectorXd::Zero(p_);
  for (std::size_t i = 0; i < models_.size(); ++i)
    for (int j : models_[i].active_indices()) inc[j] += probs_[i];
  return inc;
}

std::size_t PosteriorTable::mode_index() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs_.size(); ++i)
    if (probs_[i] > probs_[best]) best = i;
  return best;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, std::span<const int> idx) {
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = X.col(idx[c]);
  return out;
}

namespace {

void check_dims(const ModelIndicator& z, const Dataset& data) {
  if (z.size() != data.p()) throw DimensionError("model indicator length differs from p");
}

}  // namespace

double log_joint_density(const JointState& state, const Dataset& data, const Prior& prior) {
  check_dims(state.z, data);
  if (state.beta.size() != data.p()) throw DimensionError("beta length differs from p");
  const double s2 = prior.sigma * prior.sigma;
  const int n = data.n();

  Eigen::VectorXd resid = data.y;
  for (int j : state.z.active_indices()) resid -= state.beta[j] * data.X.col(j);

  double value = -0.5 * n * std::log(2.0 * std::numbers::pi * s2) - resid.squaredNorm() / (2.0 * s2);
  const double log_q = std::log(prior.q);
  const double log_1mq = std::log1p(-prior.q);
  for (int j = 0; j < data.p(); ++j) {
    const double b2 = state.beta[j] * state.beta[j];
    if (state.z[j]) {
      value += log_q - (kLogSqrt2Pi + std::log(prior.tau1)) - b2 / (2.0 * prior.tau1 * prior.tau1);
    } else {
      value += log_1mq - (kLogSqrt2Pi + std::log(prior.tau0)) - b2 / (2.0 * prior.tau0 * prior.tau0);
    }
  }
  return value;
}

double model_marginal_log(const ModelIndicator& z, const Dataset& data, const Prior& prior,
                          MarginalMethod method) {
  check_dims(z, data);
  const auto active = z.active_indices();
  const int k = static_cast<int>(active.size());
  const int n = data.n();
  const double w = prior.slab_weight();
  const double s2 = prior.sigma * prior.sigma;
  const double prior_term = k * prior.log_prior_odds();

  if (method == MarginalMethod::kAuto) method = (k < n) ? MarginalMethod::kInner : MarginalMethod::kDense;

  if (method == MarginalMethod::kDense) {
    const Eigen::MatrixXd Xz = select_columns(data.X, active);
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
    if (k > 0) A.noalias() += w * Xz * Xz.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) throw NumericalError("marginal: dense factorization failed");
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double quad = data.y.dot(llt.solve(data.y));
    return prior_term - 0.5 * quad / s2 - 0.5 * logdet;
  }

  // Inner form: det(I_n + w Xz Xz^T) = det(I_k + w Xz^T Xz) and
  // y^T A^{-1} y = |y|^2 - w (Xz^T y)^T (I_k + w Xz^T Xz)^{-1} (Xz^T y).
  if (k == 0) return prior_term - 0.5 * data.y.squaredNorm() / s2;
  const Eigen::MatrixXd Xz = select_columns(data.X, active);
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(k, k);
  B.noalias() += w * Xz.transpose() * Xz;
  Eigen::LLT<Eigen::MatrixXd> llt(B);
  if (llt.info() != Eigen::Success) throw NumericalError("marginal: inner factorization failed");
  const Eigen::VectorXd xty = Xz.transpose() * data.y;
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double quad = data.y.squaredNorm() - w * xty.dot(llt.solve(xty));
  return prior_term - 0.5 * quad / s2 - 0.5 * logdet;
}

double model_ratio_log(const ModelIndicator& z1, const ModelIndicator& z2, const Dataset& data,
                       const Prior& prior) {
  check_dims(z1, data);
  check_dims(z2, data);
  if (!z1.subset_of(z2)) throw ConfigError("model_ratio_log: z1 must be a subset of z2");
  std::vector<int> added;
  for (int j = 0; j < data.p(); ++j)
    if (z2[j] && !z1[j]) added.push_back(j);
  const int m = static_cast<int>(added.size());
  if (m == 0) return 0.0;

  const double w = prior.slab_weight();
  const double s2 = prior.sigma * prior.sigma;
  const auto base = z1.active_indices();
  const Eigen::MatrixXd U = select_columns(data.X, added);

  // Apply A^{-1} for A = I + w X1 X1^T through the k x k inner system.
  Eigen::MatrixXd AinvU = U;
  Eigen::VectorXd Ainvy = data.y;
  if (!base.empty()) {
    const Eigen::MatrixXd X1 = select_columns(data.X, base);
    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(X1.cols(), X1.cols());
    B.noalias() += w * X1.transpose() * X1;
    Eigen::LLT<Eigen::MatrixXd> llt(B);
    AinvU.noalias() -= w * X1 * llt.solve(X1.transpose() * U);
    Ainvy.noalias() -= w * X1 * llt.solve(X1.transpose() * data.y);
  }
  const Eigen::MatrixXd G = U.transpose() * AinvU;  // U^T A^{-1} U
  const Eigen::VectorXd g = U.transpose() * Ainvy;  // U^T A^{-1} y

  Eigen::MatrixXd det_mat = Eigen::MatrixXd::Identity(m, m) + w * G;
  Eigen::LLT<Eigen::MatrixXd> det_llt(det_mat);
  const double logdet = 2.0 * det_llt.matrixLLT().diagonal().array().log().sum();

  Eigen::MatrixXd inner = G;
  inner.diagonal().array() += 1.0 / w;  // sigma^2/tau1^2 I + G
  Eigen::LLT<Eigen::MatrixXd> inner_llt(inner);
  const double quad = g.dot(inner_llt.solve(g));
  if (det_llt.info() != Eigen::Success || inner_llt.info() != Eigen::Success)
    throw NumericalError("model_ratio_log: factorization failed");

  return m * prior.log_prior_odds() - 0.5 * logdet + 0.5 * quad / s2;
}

PosteriorTable enumerate_posterior(const Dataset& data, const Prior& prior, int p_max) {
  const int p = data.p();
  if (p > p_max) {
    std::ostringstream os;
    os << "enumerate_posterior: p = " << p << " exceeds the enumeration limit " << p_max;
    throw GuardError(os.str());
  }
  if (p > 30) throw GuardError("enumerate_posterior: p > 30 is not addressable");
  const std::uint64_t count = 1ULL << p;
  std::vector<ModelIndicator> models;
  models.reserve(count);
  for (std::uint64_t mask = 0; mask < count; ++mask) models.push_back(ModelIndicator::from_mask(p, mask));
  return enumerate_models(data, prior, models);
}

PosteriorTable enumerate_models(const Dataset& data, const Prior& prior,
                                std::span<const ModelIndicator> models) {
  if (models.empty()) throw ConfigError("enumerate_models: empty model list");
  std::vector<double> logw(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) logw[i] = model_marginal_log(models[i], data, prior);
  return PosteriorTable(data.p(), std::vector<ModelIndicator>(models.begin(), models.end()),
                        std::move(logw));
}

Eigen::MatrixXd BetaConditional::covariance() const {
  const auto k = mean.size();
  return sigma * sigma * precision_llt.solve(Eigen::MatrixXd::Identity(k, k));
}

BetaConditional beta_conditional_params(const ModelIndicator& z, const Dataset& data,
                                        const Prior& prior) {
  check_dims(z, data);
  BetaConditional out;
  out.active = z.active_indices();
  out.sigma = prior.sigma;
  const auto k = static_cast<Eigen::Index>(out.active.size());
  const Eigen::MatrixXd Xz = select_columns(data.X, out.active);
  out.precision = Xz.transpose() * Xz;
  out.precision.diagonal().array() += 1.0 / prior.slab_weight();
  out.precision_llt.compute(out.precision);
  if (k > 0 && out.precision_llt.info() != Eigen::Success)
    throw NumericalError("beta_conditional_params: factorization failed");
  out.mean = k > 0 ? Eigen::VectorXd(out.precision_llt.solve(Xz.transpose() * data.y))
                   : Eigen::VectorXd(0);
  return out;
}

}  // namespace sslab
