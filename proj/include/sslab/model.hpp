#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace sslab {

// Spike-and-slab hyperparameters. Construction validates the invariants.
struct Prior {
  double q = 0.5;      // inclusion probability
  double tau0 = 0.1;   // spike std
  double tau1 = 1.0;   // slab std
  double sigma = 1.0;  // noise std
  double delta = 1.0;  // scaling exponent, only used by suggest_prior

  Prior() = default;
  Prior(double q, double tau0, double tau1, double sigma, double delta = 1.0);

  void validate() const;
  double log_prior_odds() const;  // log(q / (1 - q))
  // Column weight of the slab in M = I + w X_z X_z^T, w = tau1^2 / sigma^2.
  double slab_weight() const { return tau1 * tau1 / (sigma * sigma); }
};

class ModelIndicator {
 public:
  ModelIndicator() = default;
  explicit ModelIndicator(int p) : bits_(static_cast<std::size_t>(p), 0) {}
  ModelIndicator(int p, std::span<const int> active);

  static ModelIndicator from_mask(int p, std::uint64_t mask);
  static ModelIndicator from_string(const std::string& bits);
  static ModelIndicator all(int p);

  int size() const { return static_cast<int>(bits_.size()); }
  int active_count() const { return active_count_; }
  bool operator[](int j) const { return bits_[static_cast<std::size_t>(j)] != 0; }
  void set(int j, bool on);
  void flip(int j) { set(j, !(*this)[j]); }

  std::vector<int> active_indices() const;
  std::vector<int> inactive_indices() const;
  std::uint64_t to_mask() const;
  std::string to_string() const;

  bool subset_of(const ModelIndicator& other) const;
  int hamming(const ModelIndicator& other) const;

  friend bool operator==(const ModelIndicator& a, const ModelIndicator& b) {
    return a.bits_ == b.bits_;
  }

 private:
  std::vector<std::uint8_t> bits_;
  int active_count_ = 0;
};

struct ModelIndicatorHash {
  std::size_t operator()(const ModelIndicator& z) const {
    return std::hash<std::string>{}(z.to_string());
  }
};

struct Truth {
  Eigen::VectorXd beta_star;
  ModelIndicator z_star;
};

struct Dataset {
  Eigen::MatrixXd X;  // n x p, column-major so columns are contiguous
  Eigen::VectorXd y;
  std::optional<Truth> truth;
  double sigma_hint = 1.0;  // sigma used at generation time, for file headers

  Dataset() = default;
  Dataset(Eigen::MatrixXd X, Eigen::VectorXd y, std::optional<Truth> truth = std::nullopt);

  int n() const { return static_cast<int>(X.rows()); }
  int p() const { return static_cast<int>(X.cols()); }
  void validate() const;
};

struct JointState {
  Eigen::VectorXd beta;
  ModelIndicator z;
};

// Normalized posterior over a finite collection of models.
class PosteriorTable {
 public:
  PosteriorTable() = default;
  PosteriorTable(int p, std::vector<ModelIndicator> models, std::vector<double> log_weights);

  int p() const { return p_; }
  std::size_t size() const { return models_.size(); }
  const std::vector<ModelIndicator>& models() const { return models_; }
  const std::vector<double>& probs() const { return probs_; }
  const std::vector<double>& log_weights() const { return log_weights_; }
  double log_norm() const { return log_norm_; }

  // Zero for models outside the table.
  double prob(const ModelIndicator& z) const;
  Eigen::VectorXd inclusion_probs() const;
  // Index of the highest-probability model.
  std::size_t mode_index() const;

 private:
  int p_ = 0;
  std::vector<ModelIndicator> models_;
  std::vector<double> probs_;
  std::vector<double> log_weights_;
  double log_norm_ = 0.0;
  std::unordered_map<ModelIndicator, std::size_t, ModelIndicatorHash> index_;
};

// Columns of X selected by `idx`.
Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, std::span<const int> idx);

// Full normalized log of the joint density pi(beta, z | y) numerator.
double log_joint_density(const JointState& state, const Dataset& data, const Prior& prior);

enum class MarginalMethod { kAuto, kInner, kDense };

// Unnormalized log pi(z | y), up to a z-independent constant.
double model_marginal_log(const ModelIndicator& z, const Dataset& data, const Prior& prior,
                          MarginalMethod method = MarginalMethod::kAuto);

// log pi(z2 | y) - log pi(z1 | y) for z1 a subset of z2, via the low-rank
// determinant and Woodbury updates on top of z1.
double model_ratio_log(const ModelIndicator& z1, const ModelIndicator& z2, const Dataset& data,
                       const Prior& prior);

inline constexpr int kDefaultEnumerationLimit = 16;

// Exact posterior over all 2^p models. Throws GuardError when p > p_max.
PosteriorTable enumerate_posterior(const Dataset& data, const Prior& prior,
                                   int p_max = kDefaultEnumerationLimit);

// Posterior restricted (renormalized) to the given models.
PosteriorTable enumerate_models(const Dataset& data, const Prior& prior,
                                std::span<const ModelIndicator> models);

// Active block of beta | z, y: N(Sigma^{-1} Xz^T y, sigma^2 Sigma^{-1}) with
// Sigma = Xz^T Xz + (sigma^2/tau1^2) I. Inactive coordinates are i.i.d.
// N(0, tau0^2) and are not represented here.
struct BetaConditional {
  std::vector<int> active;
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;                 // Sigma
  Eigen::LLT<Eigen::MatrixXd> precision_llt;  // factor of Sigma
  double sigma = 1.0;

  Eigen::MatrixXd covariance() const;  // sigma^2 Sigma^{-1}
};

BetaConditional beta_conditional_params(const ModelIndicator& z, const Dataset& data,
                                        const Prior& prior);

}  // namespace sslab
