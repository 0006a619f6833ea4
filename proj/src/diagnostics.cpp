#include "sslab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "sslab/error.hpp"
#include "sslab/numeric.hpp"

namespace sslab {

PosteriorTable empirical_table(std::span<const ModelIndicator> samples) {
  if (samples.empty()) throw ConfigError("empirical_table: no samples");
  std::map<std::string, long> counts;
  for (const auto& z : samples) ++counts[z.to_string()];
  std::vector<ModelIndicator> models;
  std::vector<double> logw;
  for (const auto& [key, c] : counts) {
    models.push_back(ModelIndicator::from_string(key));
    logw.push_back(std::log(static_cast<double>(c)));
  }
  return PosteriorTable(samples.front().size(), std::move(models), std::move(logw));
}

double table_tv(const PosteriorTable& a, const PosteriorTable& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a.probs()[i] - b.prob(a.models()[i]));
  for (std::size_t i = 0; i < b.size(); ++i)
    if (a.prob(b.models()[i]) == 0.0) sum += b.probs()[i];
  return std::clamp(0.5 * sum, 0.0, 1.0);
}

double z_tv(std::span<const ModelIndicator> samples, const PosteriorTable& table) {
  return table_tv(empirical_table(samples), table);
}

Eigen::VectorXd inclusion_probs(std::span<const ModelIndicator> samples) {
  if (samples.empty()) throw ConfigError("inclusion_probs: no samples");
  const int p = samples.front().size();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(p);
  for (const auto& z : samples)
    for (int j = 0; j < p; ++j) out[j] += z[j] ? 1.0 : 0.0;
  return out / static_cast<double>(samples.size());
}

std::vector<ModelIndicator> threshold_models(const Eigen::MatrixXd& outputs, double threshold) {
  std::vector<ModelIndicator> out;
  out.reserve(static_cast<std::size_t>(outputs.rows()));
  for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
    ModelIndicator z(static_cast<int>(outputs.cols()));
    for (Eigen::Index j = 0; j < outputs.cols(); ++j)
      if (std::abs(outputs(i, j)) > threshold) z.set(static_cast<int>(j), true);
    out.push_back(std::move(z));
  }
  return out;
}

double spike_slab_crossover(const Prior& prior) {
  if (!(prior.tau0 < prior.tau1)) throw ConfigError("crossover threshold needs tau0 < tau1");
  const double num = 2.0 * (std::log1p(-prior.q) - std::log(prior.q) + std::log(prior.tau1 / prior.tau0));
  const double den = 1.0 / square(prior.tau0) - 1.0 / square(prior.tau1);
  return std::sqrt(std::max(0.0, num / den));
}

double half_beta_min_threshold(int n, int p, double sigma, double c) {
  return 0.5 * c * sigma * std::sqrt(std::log(static_cast<double>(p)) / n);
}

double w2_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ConfigError("w2_1d: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  if (x.size() == y.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += square(x[i] - y[i]);
    return std::sqrt(s / static_cast<double>(x.size()));
  }
  // Integrate the squared quantile difference over the merged breakpoints.
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double u = 0.0, s = 0.0;
  while (i < x.size() && j < y.size()) {
    const double ux = static_cast<double>(i + 1) / nx, uy = static_cast<double>(j + 1) / ny;
    const double next = std::min(ux, uy);
    s += (next - u) * square(x[i] - y[j]);
    u = next;
    if (ux <= next) ++i;
    if (uy <= next) ++j;
  }
  return std::sqrt(s);
}

double ess(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 4) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (series[i] - mean) * (series[i + lag] - mean);
    return s / static_cast<double>(n);
  };
  const double g0 = autocov(0);
  if (!(g0 > 0.0)) return static_cast<double>(n);
  double tau = -g0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    double pair = autocov(2 * m) + autocov(2 * m + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    prev = pair;
    tau += 2.0 * pair;
  }
  return static_cast<double>(n) * g0 / std::max(tau, 1e-300);
}

namespace {

// Minimum-cost perfect assignment (rows to columns), O(n^3).
std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n);
  for (int j = 1; j <= n; ++j) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace

double w2_assignment(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int max_points) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("w2_assignment: shape mismatch");
  if (a.rows() == 0) throw ConfigError("w2_assignment: empty sample");
  if (a.rows() > max_points) throw GuardError("w2_assignment: too many points for exact assignment");
  const auto n = a.rows();
  Eigen::MatrixXd cost(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) cost(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  const auto match = hungarian(cost);
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) s += cost(i, match[static_cast<std::size_t>(i)]);
  return std::sqrt(s / static_cast<double>(n));
}

double w2_sliced(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int directions, Rng& rng) {
  if (a.cols() != b.cols()) throw DimensionError("w2_sliced: dimension mismatch");
  if (directions < 1) throw ConfigError("w2_sliced: need at least one direction");
  double s = 0.0;
  for (int d = 0; d < directions; ++d) {
    Eigen::VectorXd dir = rng.normal_vector(a.cols());
    dir.normalize();
    const Eigen::VectorXd pa = a * dir, pb = b * dir;
    s += square(w2_1d(std::span<const double>(pa.data(), static_cast<std::size_t>(pa.size())),
                      std::span<const double>(pb.data(), static_cast<std::size_t>(pb.size()))));
  }
  return std::sqrt(s / directions);
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
  const Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double w2_gaussian(const Eigen::VectorXd& m1, const Eigen::MatrixXd& S1, const Eigen::VectorXd& m2,
                   const Eigen::MatrixXd& S2) {
  if (m1.size() != m2.size() || S1.rows() != m1.size() || S2.rows() != m2.size())
    throw DimensionError("w2_gaussian: dimension mismatch");
  const Eigen::MatrixXd r = psd_sqrt(S2);
  const Eigen::MatrixXd cross = psd_sqrt(r * S1 * r);
  const double bures = S1.trace() + S2.trace() - 2.0 * cross.trace();
  return std::sqrt(std::max(0.0, (m1 - m2).squaredNorm() + bures));
}

MeanCov sample_mean_cov(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 2) throw ConfigError("sample_mean_cov: need at least two rows");
  MeanCov mc;
  mc.mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd c = rows.rowwise() - mc.mean.transpose();
  mc.cov = c.transpose() * c / static_cast<double>(rows.rows() - 1);
  return mc;
}

double w2_gaussian_fit(const Eigen::MatrixXd& samples, const Eigen::VectorXd& m, const Eigen::MatrixXd& S) {
  const auto mc = sample_mean_cov(samples);
  return w2_gaussian(mc.mean, mc.cov, m, S);
}

double ball_mass(const PosteriorTable& table, const Dataset& data, const Prior& prior,
                 double r_active, double r_inactive, int draws_per_model, Rng& rng,
                 double mass_cutoff) {
  if (!data.truth) throw ConfigError("ball_mass: dataset has no truth");
  if (draws_per_model < 1) throw ConfigError("ball_mass: need at least one draw");
  const auto& bstar = data.truth->beta_star;
  double mass = 0.0;
  for (std::size_t m = 0; m < table.size(); ++m) {
    const double w = table.probs()[m];
    if (w < mass_cutoff) continue;
    const auto& z = table.models()[m];
    const auto cond = beta_conditional_params(z, data, prior);
    const auto inactive = z.inactive_indices();
    int hits = 0;
    for (int d = 0; d < draws_per_model; ++d) {
      double act = 0.0;
      if (!cond.active.empty()) {
        // mean + sigma U^{-1} xi, with Sigma = U^T U
        const Eigen::VectorXd xi = rng.normal_vector(static_cast<Eigen::Index>(cond.active.size()));
        const Eigen::VectorXd draw =
            cond.mean + cond.sigma * cond.precision_llt.matrixU().solve(xi);
        for (std::size_t a = 0; a < cond.active.size(); ++a)
          act += square(draw[static_cast<Eigen::Index>(a)] - bstar[cond.active[a]]);
      }
      double ina = 0.0;
      for (std::size_t j = 0; j < inactive.size(); ++j) ina += square(prior.tau0 * rng.normal());
      if (std::sqrt(act) <= r_active && std::sqrt(ina) <= r_inactive) ++hits;
    }
    mass += w * hits / draws_per_model;
  }
  return mass;
}

namespace {

BandedMean banded(const std::vector<double>& v) {
  BandedMean b;
  b.count = static_cast<int>(v.size());
  if (v.empty()) return b;
  double s = 0.0;
  for (double x : v) s += x;
  b.mean = s / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += square(x - b.mean);
  const double se = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1) / v.size()) : 0.0;
  b.lo = b.mean - 1.96 * se;
  b.hi = b.mean + 1.96 * se;
  return b;
}

}  // namespace

ContractionReport contraction_report(const std::vector<Replication>& runs) {
  ContractionReport rep;
  std::vector<double> truth, large, ball;
  for (const auto& r : runs) {
    const double pt = r.table.prob(r.z_star);
    truth.push_back(pt);
    if (pt >= 0.9) ++rep.truth_mass_above_09;
    const double cut = r.k * (1.0 + 1.0 / r.delta);
    double lm = 0.0;
    for (std::size_t i = 0; i < r.table.size(); ++i)
      if (r.table.models()[i].active_count() > cut) lm += r.table.probs()[i];
    large.push_back(lm);
    if (r.ball_mass >= 0.0) ball.push_back(r.ball_mass);
    if (r.from_sampler) ++rep.sampler_estimates;
  }
  rep.replications = static_cast<int>(runs.size());
  rep.truth_mass = banded(truth);
  rep.large_mass = banded(large);
  rep.ball = banded(ball);
  rep.per_replication_truth_mass = truth;
  return rep;
}

void write_contraction_csv(std::ostream& os, const ContractionReport& r) {
  os << std::setprecision(17);
  os << "quantity,mean,lo,hi,count\n";
  auto row = [&](const char* name, const BandedMean& b) {
    os << name << ',' << b.mean << ',' << b.lo << ',' << b.hi << ',' << b.count << '\n';
  };
  row("truth_mass", r.truth_mass);
  row("large_model_mass", r.large_mass);
  row("ball_mass", r.ball);
}

std::string format_contraction_text(const ContractionReport& r) {
  std::ostringstream os;
  os << std::setprecision(4);
  os << "replications: " << r.replications;
  if (r.sampler_estimates > 0) os << " (" << r.sampler_estimates << " from sampler estimates)";
  os << "\n";
  os << "pi(z*|y):           " << r.truth_mass.mean << "  [" << r.truth_mass.lo << ", " << r.truth_mass.hi << "]\n";
  os << "pi(|z| large | y):  " << r.large_mass.mean << "  [" << r.large_mass.lo << ", " << r.large_mass.hi << "]\n";
  if (r.ball.count > 0)
    os << "ball mass:          " << r.ball.mean << "  [" << r.ball.lo << ", " << r.ball.hi << "]\n";
  os << "replications with pi(z*|y) >= 0.9: " << r.truth_mass_above_09 << "\n";
  return os.str();
}

}  // namespace sslab
