#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sslab/linalg.hpp"
#include "sslab/model.hpp"
#include "sslab/rng.hpp"

namespace sslab {

struct GibbsConfig {
  long sweeps = 1000;
  long burn_in = 100;
  long thin = 1;
  bool lazy = false;       // Bern(1/2) no-move coin before each step
  bool blocked_z = false;  // exact z | beta block instead of the site scan
  int z_block_pmax = 12;
  bool random_scan = false;  // random permutation per sweep instead of ascending
  std::uint64_t seed = 1;
  CacheConfig cache;
  GaussianSamplerOptions gaussian;

  void validate() const;
  long emitted_count() const { return (sweeps - burn_in) / thin; }
};

struct RunMetadata {
  long steps = 0;
  long lazy_holds = 0;
  long cache_rebuilds = 0;
  long low_rank_updates = 0;
  bool blocked_fallback = false;
  double wall_seconds = 0.0;
};

struct Sample {
  long sweep = 0;
  JointState state;
  double log_density = 0.0;
};

using SampleSink = std::function<void(const Sample&)>;

// log pi(z_j = 1 | beta, y, z_-j) - log pi(z_j = 0 | beta, y, z_-j).
// Independent of the current value of z_j.
double z_site_logit(int j, const JointState& state, const Dataset& data, const Prior& prior);

// Resumable single chain. Owns state, low-rank cache and random stream.
class GibbsChain {
 public:
  GibbsChain(const Dataset& data, const Prior& prior, GibbsConfig config, JointState init);

  // One iteration of the configured kernel (lazy coin, then sweep or block).
  void step();
  // Prop.-style systematic scan: beta | z then z_j | rest for all j.
  void sweep();
  // Lazy blocked kernel: with prob 1/2 hold; otherwise beta | z then z | beta.
  void blocked_step();
  // The z-part of blocked_step on the current beta; exposed for tests.
  void draw_z_block();
  void draw_beta();
  void scan_z();

  const JointState& state() const { return state_; }
  double log_density() const;
  const RunMetadata& metadata() const { return meta_; }
  Rng& rng() { return rng_; }
  const LowRankCache& cache() const { return cache_; }

  struct Checkpoint {
    JointState state;
    std::string rng_state;
    ModelIndicator cache_base;
    int cache_generation = 0;
    long steps = 0;
  };
  Checkpoint checkpoint() const;
  void resume(const Checkpoint& cp);

 private:
  void refresh_fitted();

  const Dataset* data_;
  Prior prior_;
  GibbsConfig config_;
  JointState state_;
  Rng rng_;
  LowRankCache cache_;
  RunMetadata meta_;
  Eigen::VectorXd col_sq_norm_;
  Eigen::VectorXd fitted_;  // X_z beta_z
  std::vector<int> order_;
};

// Drive a chain for config.sweeps iterations, emitting every thin-th state
// after burn-in to `sink`.
RunMetadata gibbs_run(GibbsChain& chain, const GibbsConfig& config, const SampleSink& sink);
RunMetadata gibbs_run(const Dataset& data, const Prior& prior, const GibbsConfig& config,
                      const JointState& init, const SampleSink& sink);
std::vector<Sample> gibbs_collect(const Dataset& data, const Prior& prior,
                                  const GibbsConfig& config, const JointState& init,
                                  RunMetadata* meta = nullptr);

}  // namespace sslab
