#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "sslab/error.hpp"
#include "sslab/logistic.hpp"
#include "test_util.hpp"

using namespace sslab;

TEST_CASE("PG mean series") {
  CHECK(pg_mean_series(0.0) == doctest::Approx(0.25).epsilon(1e-4));
  for (double c : {0.5, 1.0, 3.0}) CHECK(pg_mean_series(c) == doctest::Approx(std::tanh(c / 2) / (2 * c)).epsilon(1e-4));
}

TEST_CASE("PG sampler mean and Laplace transform") {
  Rng rng(1);
  const int N = 100000;
  for (double c : {0.0, 1.5}) {
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < N; ++i) {
      const double w = pg_sample(c, rng);
      REQUIRE(w > 0.0);
      s += w;
      s2 += w * w;
    }
    const double mean = s / N, se = std::sqrt((s2 / N - mean * mean) / N);
    CHECK(std::abs(mean - pg_mean_series(c)) <= 4 * se);
  }
  std::vector<double> w(N);
  for (auto& v : w) v = pg_sample(0.0, rng);
  for (double phi : {0.5, 1.0, 2.0}) {
    double acc = 0.0;
    for (double v : w) acc += std::exp(-v * phi * phi / 2);
    CHECK(std::abs(acc / N - 1.0 / std::cosh(phi / 2)) <= 0.01);
  }
}

TEST_CASE("PG depends on c through c squared") {
  Rng a(2), b(3);
  const int N = 100000;
  std::vector<double> x(N), y(N);
  for (int i = 0; i < N; ++i) {
    x[i] = pg_sample(1.3, a);
    y[i] = pg_sample(-1.3, b);
  }
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double ks = 0.0;
  std::size_t i = 0, j = 0;
  while (i < x.size() && j < y.size()) {
    if (x[i] <= y[j]) ++i; else ++j;
    ks = std::max(ks, std::abs(double(i) - double(j)) / N);
  }
  CHECK(ks <= 0.01);
}

TEST_CASE("omega integrates out to the logistic likelihood") {
  Rng rng(4);
  const int N = 100000;
  std::vector<double> w(N);
  for (auto& v : w) v = pg_sample(0.0, rng);
  for (int rep = 0; rep < 20; ++rep) {
    const double psi = 3.0 * rng.normal();
    const int label = rep % 2;
    double acc = 0.0;
    for (double v : w) acc += std::exp(-v * psi * psi / 2);
    const double augmented = 0.5 * std::exp((label - 0.5) * psi) * acc / N;
    const double direct = std::exp(label * psi) / (1 + std::exp(psi));
    CHECK(std::abs(augmented - direct) <= 0.01);
  }
}

TEST_CASE("site logit equals augmented density difference") {
  auto data = testutil::random_dataset(10, 3, 5);
  for (int i = 0; i < 10; ++i) data.y[i] = data.y[i] > 0 ? 1.0 : 0.0;
  Prior prior(0.3, 0.1, 2.0, 1.0);
  Rng rng(6);
  for (int rep = 0; rep < 5; ++rep) {
    LogisticState s{rng.normal_vector(3), ModelIndicator::from_mask(3, rng.index(8)), Eigen::VectorXd(10)};
    for (int i = 0; i < 10; ++i) s.omega[i] = pg_sample(rng.normal(), rng);
    for (int j = 0; j < 3; ++j) {
      auto on = s, off = s;
      on.z.set(j, true);
      off.z.set(j, false);
      const double diff = logistic_augmented_log_density(on, data, prior) - logistic_augmented_log_density(off, data, prior);
      CHECK(std::abs(logistic_site_logit(j, s, data, prior) - diff) <= 1e-10);
    }
  }
}

TEST_CASE("zero design draws from the prior") {
  Dataset data(Eigen::MatrixXd::Zero(6, 1), Eigen::VectorXd::Ones(6));
  Prior prior(0.5, 0.1, 1.3, 1.0);
  Rng rng(7);
  auto s = logistic_initial_state(data, ModelIndicator::all(1));
  const int N = 40000;
  double w_sum = 0.0;
  int on = 0;
  for (int i = 0; i < N; ++i) {
    s = logistic_gibbs_sweep(s, data, prior, rng);
    w_sum += s.omega.mean();
    if (s.z[0]) ++on;
  }
  CHECK(std::abs(w_sum / N - 0.25) <= 0.005);
  CHECK(on > 0);
}

TEST_CASE("posterior mean against quadrature, p = 1") {
  const int n = 10;
  Rng rng(8);
  Eigen::MatrixXd X(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = rng.normal();
    y[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-1.2 * X(i, 0))) ? 1.0 : 0.0;
  }
  Dataset data(X, y);
  Prior prior(0.5, 0.05, 2.0, 1.0);

  auto loglik = [&](double b) {
    double v = 0.0;
    for (int i = 0; i < n; ++i) {
      const double psi = X(i, 0) * b;
      v += y[i] * psi - std::log1p(std::exp(psi));
    }
    return v;
  };
  // Slab part on a fine grid; the spike part has zero mean and mass (1 - q) L(0).
  const double norm = 1.0 / (std::sqrt(2 * std::numbers::pi) * prior.tau1);
  double mass = 0.0, first = 0.0;
  const double lo = -12.0, hi = 12.0;
  const int grid = 200001;
  const double dx = (hi - lo) / (grid - 1);
  for (int i = 0; i < grid; ++i) {
    const double b = lo + i * dx;
    const double d = prior.q * norm * std::exp(loglik(b) - b * b / (2 * prior.tau1 * prior.tau1));
    const double wt = (i == 0 || i == grid - 1) ? 0.5 : 1.0;
    mass += wt * d * dx;
    first += wt * d * b * dx;
  }
  const double expected = first / (mass + (1 - prior.q) * std::exp(loglik(0.0)));

  GibbsConfig g;
  g.sweeps = 100000;
  g.burn_in = 2000;
  g.seed = 9;
  const auto out = logistic_run(data, prior, g, logistic_initial_state(data, ModelIndicator::all(1)));
  double mean = 0.0;
  for (const auto& s : out) mean += s.state.beta[0] / static_cast<double>(out.size());
  CHECK(std::abs(mean - expected) <= 0.05);
}

TEST_CASE("labels must be binary") {
  const auto data = testutil::random_dataset(5, 2, 10);
  CHECK_THROWS_AS(validate_binary_labels(data), ConfigError);
}
