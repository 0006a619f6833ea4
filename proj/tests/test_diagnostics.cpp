#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <vector>

#include <doctest.h>

#include "sslab/diagnostics.hpp"
#include "sslab/error.hpp"
#include "sslab/statgen.hpp"
#include "test_util.hpp"

using namespace sslab;

namespace {

PosteriorTable random_table(int p, Rng& rng) {
  std::vector<ModelIndicator> models;
  std::vector<double> lw;
  for (std::uint64_t m = 0; m < (1u << p); ++m) {
    models.push_back(ModelIndicator::from_mask(p, m));
    lw.push_back(2.0 * rng.normal());
  }
  return PosteriorTable(p, models, lw);
}

double brute_force_w2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  std::vector<int> perm(static_cast<std::size_t>(a.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) c += (a.row(i) - b.row(perm[i])).squaredNorm();
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / a.rows());
}

}  // namespace

TEST_CASE("total variation") {
  Rng rng(1);
  SUBCASE("iid draws from the table") {
    const auto table = random_table(4, rng);
    std::vector<ModelIndicator> draws;
    draws.reserve(1000000);
    std::vector<double> cdf(table.size());
    std::partial_sum(table.probs().begin(), table.probs().end(), cdf.begin());
    for (int i = 0; i < 1000000; ++i) {
      const auto it = std::lower_bound(cdf.begin(), cdf.end(), rng.uniform() * cdf.back());
      draws.push_back(table.models()[static_cast<std::size_t>(it - cdf.begin())]);
    }
    CHECK(z_tv(draws, table) <= 0.01);
  }
  SUBCASE("single model against uniform") {
    const PosteriorTable uniform(2, {ModelIndicator::from_mask(2, 0), ModelIndicator::from_mask(2, 1),
                                     ModelIndicator::from_mask(2, 2), ModelIndicator::from_mask(2, 3)},
                                 {0.0, 0.0, 0.0, 0.0});
    const std::vector<ModelIndicator> same(10, ModelIndicator::from_mask(2, 1));
    CHECK(z_tv(same, uniform) == doctest::Approx(0.75).epsilon(1e-15));
    const std::vector<ModelIndicator> each{uniform.models()[0], uniform.models()[1], uniform.models()[2],
                                           uniform.models()[3]};
    CHECK(z_tv(each, uniform) <= 1e-15);
  }
  SUBCASE("table distances are a metric") {
    for (int rep = 0; rep < 20; ++rep) {
      const auto a = random_table(3, rng), b = random_table(3, rng), c = random_table(3, rng);
      CHECK(table_tv(a, a) <= 1e-15);
      CHECK(table_tv(a, b) == table_tv(b, a));
      CHECK(table_tv(a, c) <= table_tv(a, b) + table_tv(b, c) + 1e-15);
    }
  }
}

TEST_CASE("inclusion probabilities and empirical tables") {
  const std::vector<ModelIndicator> ones(7, ModelIndicator::all(3));
  CHECK(inclusion_probs(ones) == Eigen::VectorXd::Ones(3));
  const std::vector<ModelIndicator> mix{ModelIndicator::from_string("10"), ModelIndicator::from_string("11"),
                                        ModelIndicator::from_string("10"), ModelIndicator::from_string("00")};
  CHECK(inclusion_probs(mix) == Eigen::Vector2d(0.75, 0.25));
  const auto t = empirical_table(mix);
  CHECK(t.size() == 3);
  CHECK(t.prob(ModelIndicator::from_string("10")) == doctest::Approx(0.5));
}

TEST_CASE("thresholds") {
  const Prior prior(0.1, 0.2, 3.0, 1.0);
  const double b = spike_slab_crossover(prior);
  auto dens = [](double x, double tau) { return std::exp(-x * x / (2 * tau * tau)) / tau; };
  CHECK(prior.q * dens(b, prior.tau1) == doctest::Approx((1 - prior.q) * dens(b, prior.tau0)).epsilon(1e-12));
  CHECK_THROWS_AS(spike_slab_crossover(Prior(0.1, 0.5, 0.5, 1.0)), ConfigError);
  CHECK(half_beta_min_threshold(100, 8, 2.0) == doctest::Approx(2.0 * std::sqrt(std::log(8.0) / 100)));

  Eigen::MatrixXd out(2, 3);
  out << 0.1, -0.5, 0.3, -0.31, 0.0, 2.0;
  const auto zs = threshold_models(out, 0.3);
  CHECK(zs[0] == ModelIndicator::from_string("010"));
  CHECK(zs[1] == ModelIndicator::from_string("101"));
}

TEST_CASE("one-dimensional W2") {
  Rng rng(2);
  std::vector<double> a(500);
  for (auto& v : a) v = rng.normal();
  CHECK(w2_1d(a, a) == 0.0);
  std::vector<double> shifted = a;
  for (auto& v : shifted) v += 0.7;
  CHECK(w2_1d(a, shifted) == doctest::Approx(0.7).epsilon(1e-12));
  const std::vector<double> two{0.0, 1.0}, three{0.0, 0.5, 1.0};
  CHECK(w2_1d(two, three) == doctest::Approx(std::sqrt(1.0 / 12)).epsilon(1e-12));
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> x(40), y(40), z(40);
    for (int i = 0; i < 40; ++i) {
      x[i] = rng.normal();
      y[i] = 2 * rng.normal() + 1;
      z[i] = rng.exponential();
    }
    CHECK(w2_1d(x, z) <= w2_1d(x, y) + w2_1d(y, z) + 1e-12);
  }
}

TEST_CASE("effective sample size") {
  Rng rng(3);
  const int N = 10000;
  std::vector<double> iid(N), ar(N);
  for (auto& v : iid) v = rng.normal();
  CHECK(ess(iid) >= 0.8 * N);
  CHECK(ess(iid) <= 1.2 * N);
  const double rho = 0.5;
  ar[0] = rng.normal();
  for (int i = 1; i < N; ++i) ar[i] = rho * ar[i - 1] + std::sqrt(1 - rho * rho) * rng.normal();
  const double expected = N * (1 - rho) / (1 + rho);
  CHECK(std::abs(ess(ar) / expected - 1.0) <= 0.2);
}

TEST_CASE("multivariate W2") {
  Rng rng(4);
  SUBCASE("assignment against brute force") {
    for (int rep = 0; rep < 10; ++rep) {
      const Eigen::MatrixXd a = rng.normal_vector(14).reshaped(7, 2);
      const Eigen::MatrixXd b = rng.normal_vector(14).reshaped(7, 2);
      CHECK(w2_assignment(a, b) == doctest::Approx(brute_force_w2(a, b)).epsilon(1e-12));
    }
  }
  SUBCASE("sliced distance is at most the exact one") {
    const Eigen::MatrixXd a = rng.normal_vector(300).reshaped(100, 3);
    Eigen::MatrixXd b = rng.normal_vector(300).reshaped(100, 3);
    b.col(0).array() += 1.0;
    CHECK(w2_sliced(a, b, 200, rng) <= w2_assignment(a, b) + 1e-12);
    CHECK_THROWS(w2_assignment(rng.normal_vector(1026).reshaped(513, 2), rng.normal_vector(1026).reshaped(513, 2)));
  }
  SUBCASE("Gaussian formula") {
    const Eigen::Vector2d m(0.3, -1.0);
    Eigen::Matrix2d S;
    S << 2.0, 0.3, 0.3, 1.0;
    CHECK(w2_gaussian(m, S, m, S) <= 1e-7);
    const Eigen::VectorXd m1 = Eigen::VectorXd::Constant(1, 1.0), m2 = Eigen::VectorXd::Constant(1, -0.5);
    const Eigen::MatrixXd s1 = Eigen::MatrixXd::Constant(1, 1, 4.0), s2 = Eigen::MatrixXd::Constant(1, 1, 0.25);
    CHECK(w2_gaussian(m1, s1, m2, s2) == doctest::Approx(std::sqrt(1.5 * 1.5 + 1.5 * 1.5)).epsilon(1e-12));
  }
}

TEST_CASE("contraction summaries") {
  SUBCASE("null signal with a small inclusion probability") {
    std::vector<Replication> runs;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      SyntheticSpec s;
      s.n = 40;
      s.p = 8;
      s.k = 0;
      s.seed = seed;
      const auto d = gen_synthetic(s);
      const auto prior = suggest_prior(40, 8, 1.0, 1.0);
      CHECK_FALSE(beta_min_check(d, prior).pass);
      Replication r;
      r.table = enumerate_posterior(d, prior);
      r.z_star = d.truth->z_star;
      runs.push_back(r);
    }
    const auto rep = contraction_report(runs);
    CHECK(rep.replications == 10);
    CHECK(rep.truth_mass.mean >= 0.8);
    CHECK(rep.truth_mass.lo <= rep.truth_mass.mean);
    CHECK(rep.truth_mass.hi >= rep.truth_mass.mean);
    std::ostringstream csv;
    write_contraction_csv(csv, rep);
    CHECK(csv.str().find("truth_mass") != std::string::npos);
    CHECK_FALSE(format_contraction_text(rep).empty());
  }
  SUBCASE("larger delta favours sparser models") {
    SyntheticSpec s;
    s.n = 30;
    s.p = 8;
    s.k = 2;
    s.signal_scale = 2.0;
    s.seed = 5;
    const auto d = gen_synthetic(s);
    std::vector<double> size;
    for (double delta : {0.5, 1.0, 2.0}) {
      const auto t = enumerate_posterior(d, suggest_prior(30, 8, 1.0, delta));
      double e = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i) e += t.probs()[i] * t.models()[i].active_count();
      size.push_back(e);
    }
    CHECK(size[1] < size[0]);
    CHECK(size[2] < size[1]);
  }
  SUBCASE("ball mass of a concentrated posterior") {
    SyntheticSpec s;
    s.n = 100;
    s.p = 6;
    s.k = 2;
    s.signal_scale = 8.0;
    s.seed = 6;
    const auto d = gen_synthetic(s);
    const auto prior = suggest_prior(100, 6, 1.0, 1.0);
    Rng rng(7);
    const double m = ball_mass(enumerate_posterior(d, prior), d, prior, 1.0, 1.0, 200, rng);
    CHECK(m >= 0.9);
    CHECK(m <= 1.0);
  }
}
