#include "sslab/gibbs.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <numeric>

#include "sslab/error.hpp"
#include "sslab/numeric.hpp"

namespace sslab {

namespace {

// Site log-odds given x_j^T (y - X_{z\j} beta_{z\j}) and |x_j|^2.
double site_logit(double beta_j, double xj_partial_resid, double col_sq, const Prior& prior) {
  const double s2 = prior.sigma * prior.sigma;
  const double b2 = beta_j * beta_j;
  return prior.log_prior_odds() + std::log(prior.tau0 / prior.tau1) -
         0.5 * (1.0 / (prior.tau1 * prior.tau1) - 1.0 / (prior.tau0 * prior.tau0)) * b2 +
         beta_j * xj_partial_resid / s2 - b2 * col_sq / (2.0 * s2);
}

}  // namespace

void GibbsConfig::validate() const {
  if (!(sweeps > burn_in && burn_in >= 0)) throw ConfigError("gibbs: need sweeps > burn_in >= 0");
  if (thin < 1) throw ConfigError("gibbs: thin must be >= 1");
  if (z_block_pmax < 0 || z_block_pmax > 24) throw ConfigError("gibbs: z_block_pmax out of range");
}

double z_site_logit(int j, const JointState& state, const Dataset& data, const Prior& prior) {
  if (state.z.size() != data.p() || state.beta.size() != data.p())
    throw DimensionError("z_site_logit: state dimension differs from p");
  Eigen::VectorXd resid = data.y;
  for (int i : state.z.active_indices())
    if (i != j) resid -= state.beta[i] * data.X.col(i);
  return site_logit(state.beta[j], data.X.col(j).dot(resid), data.X.col(j).squaredNorm(), prior);
}

GibbsChain::GibbsChain(const Dataset& data, const Prior& prior, GibbsConfig config, JointState init)
    : data_(&data),
      prior_(prior),
      config_(std::move(config)),
      state_(std::move(init)),
      rng_(config_.seed),
      cache_(data, prior, config_.cache) {
  prior_.validate();
  data.validate();
  if (state_.beta.size() != data.p() || state_.z.size() != data.p())
    throw DimensionError("gibbs: initial state dimension differs from p");
  col_sq_norm_ = data.X.colwise().squaredNorm().transpose();
  order_.resize(static_cast<std::size_t>(data.p()));
  std::iota(order_.begin(), order_.end(), 0);
  cache_.rebuild(state_.z);
  refresh_fitted();
  if (config_.blocked_z && data.p() > config_.z_block_pmax) meta_.blocked_fallback = true;
}

void GibbsChain::refresh_fitted() {
  fitted_ = Eigen::VectorXd::Zero(data_->n());
  for (int j : state_.z.active_indices()) fitted_ += state_.beta[j] * data_->X.col(j);
}

void GibbsChain::draw_beta() {
  const Eigen::VectorXd active_beta =
      sample_active_gaussian(state_.z, *data_, prior_, cache_, rng_, config_.gaussian);
  const auto active = state_.z.active_indices();
  std::size_t c = 0;
  for (int j = 0; j < data_->p(); ++j) {
    if (state_.z[j]) {
      state_.beta[j] = active_beta[static_cast<Eigen::Index>(c++)];
    } else {
      state_.beta[j] = prior_.tau0 * rng_.normal();
    }
  }
  refresh_fitted();
}

void GibbsChain::scan_z() {
  if (config_.random_scan) std::shuffle(order_.begin(), order_.end(), rng_.engine());
  for (int j : order_) {
    const auto xj = data_->X.col(j);
    const double bj = state_.beta[j];
    // x_j^T (y - X_{z\j} beta_{z\j})
    double partial = xj.dot(data_->y - fitted_);
    if (state_.z[j]) partial += bj * col_sq_norm_[j];
    const double logit_j = site_logit(bj, partial, col_sq_norm_[j], prior_);
    const bool on = rng_.uniform() < sigmoid(logit_j);
    if (on != state_.z[j]) {
      state_.z.set(j, on);
      fitted_ += (on ? bj : -bj) * xj;
    }
  }
}

void GibbsChain::draw_z_block() {
  const int p = data_->p();
  if (p > config_.z_block_pmax) {
    meta_.blocked_fallback = true;
    scan_z();
    return;
  }
  const double s2 = prior_.sigma * prior_.sigma;
  const double log_q = std::log(prior_.q), log_1mq = std::log1p(-prior_.q);
  Eigen::VectorXd w_on(p), w_off(p);
  for (int j = 0; j < p; ++j) {
    const double b2 = square(state_.beta[j]);
    w_on[j] = log_q - std::log(prior_.tau1) - b2 / (2.0 * square(prior_.tau1));
    w_off[j] = log_1mq - std::log(prior_.tau0) - b2 / (2.0 * square(prior_.tau0));
  }
  // Gray-code walk over all 2^p models, tracking the residual.
  const std::uint64_t count = 1ULL << p;
  std::vector<double> logw(count);
  Eigen::VectorXd resid = data_->y;
  double prior_sum = w_off.sum();
  std::uint64_t gray = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    if (i > 0) {
      const int j = std::countr_zero(i);
      gray ^= (1ULL << j);
      const bool on = (gray >> j) & 1ULL;
      resid -= (on ? state_.beta[j] : -state_.beta[j]) * data_->X.col(j);
      prior_sum += on ? (w_on[j] - w_off[j]) : (w_off[j] - w_on[j]);
    }
    logw[gray] = prior_sum - resid.squaredNorm() / (2.0 * s2);
  }
  const double lse = log_sum_exp(logw);
  double u = rng_.uniform();
  std::uint64_t pick = count - 1;
  for (std::uint64_t m = 0; m < count; ++m) {
    u -= std::exp(logw[m] - lse);
    if (u < 0.0) {
      pick = m;
      break;
    }
  }
  state_.z = ModelIndicator::from_mask(p, pick);
  refresh_fitted();
}

void GibbsChain::sweep() {
  draw_beta();
  scan_z();
}

void GibbsChain::blocked_step() {
  draw_beta();
  draw_z_block();
}

void GibbsChain::step() {
  ++meta_.steps;
  if (config_.lazy && rng_.uniform() < 0.5) {
    ++meta_.lazy_holds;
    return;
  }
  if (config_.blocked_z) {
    blocked_step();
  } else {
    sweep();
  }
}

double GibbsChain::log_density() const { return log_joint_density(state_, *data_, prior_); }

GibbsChain::Checkpoint GibbsChain::checkpoint() const {
  return Checkpoint{state_, rng_.serialize(), cache_.base_z(), cache_.generation(), meta_.steps};
}

void GibbsChain::resume(const Checkpoint& cp) {
  state_ = cp.state;
  rng_.deserialize(cp.rng_state);
  cache_.restore(cp.cache_base, state_.z, cp.cache_generation);
  meta_.steps = cp.steps;
  refresh_fitted();
}

RunMetadata gibbs_run(GibbsChain& chain, const GibbsConfig& config, const SampleSink& sink) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const long rebuilds0 = chain.cache().rebuild_count();
  const long low_rank0 = chain.cache().low_rank_count();
  for (long s = 1; s <= config.sweeps; ++s) {
    chain.step();
    if (s > config.burn_in && (s - config.burn_in) % config.thin == 0 && sink) {
      Sample out;
      out.sweep = s;
      out.state = chain.state();
      out.log_density = chain.log_density();
      sink(out);
    }
  }
  RunMetadata meta = chain.metadata();
  meta.cache_rebuilds = chain.cache().rebuild_count() - rebuilds0;
  meta.low_rank_updates = chain.cache().low_rank_count() - low_rank0;
  meta.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return meta;
}

RunMetadata gibbs_run(const Dataset& data, const Prior& prior, const GibbsConfig& config,
                      const JointState& init, const SampleSink& sink) {
  GibbsChain chain(data, prior, config, init);
  return gibbs_run(chain, config, sink);
}

std::vector<Sample> gibbs_collect(const Dataset& data, const Prior& prior,
                                  const GibbsConfig& config, const JointState& init,
                                  RunMetadata* meta) {
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(std::max(0L, config.emitted_count())));
  auto m = gibbs_run(data, prior, config, init, [&](const Sample& s) { out.push_back(s); });
  if (meta) *meta = m;
  return out;
}

}  // namespace sslab
