#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sslab/gibbs.hpp"
#include "sslab/model.hpp"

namespace sslab {

// Shortest round-trip text for a double (17 significant digits).
std::string format_double(double v);

std::uint64_t fnv1a64(const std::string& text);
std::string hash_hex(std::uint64_t h);

// Flat key=value configuration with [section] headers. Keys are stored as
// "section.key". Reads are tracked so unused keys can be reported.
class Config {
 public:
  Config() = default;
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Throws ConfigError naming keys that were never read.
  void require_all_used() const;
  // Throws ConfigError naming keys outside `known`.
  void require_known(const std::set<std::string>& known) const;

  // Canonical "key=value" lines in sorted order.
  std::string canonical() const;
  std::string hash() const { return hash_hex(fnv1a64(canonical())); }
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  const std::string* find(const std::string& key) const;
  std::map<std::string, std::string> entries_;
  mutable std::set<std::string> used_;
};

// Dataset text format: optional '#' comment lines, a header "n p sigma", then n
// rows of p covariates followed by the response.
void write_dataset(std::ostream& os, const Dataset& data, const std::string& config_hash = "");
Dataset read_dataset(std::istream& is);
void save_dataset(const std::string& path, const Dataset& data, const std::string& config_hash = "");
// Also loads "<path>.truth" when present.
Dataset load_dataset(const std::string& path);

// Truth sidecar: header "p", then one "beta_j z_j" line per coordinate.
void write_truth(std::ostream& os, const Truth& truth, const std::string& config_hash = "");
Truth read_truth(std::istream& is);

// Sample stream CSV: sweep,z,beta_0..beta_{p-1},log_density.
class SampleWriter {
 public:
  SampleWriter(std::ostream& os, int p, const std::string& config_hash);
  void write(const Sample& s);

 private:
  std::ostream* os_;
  int p_;
};

struct SampleRecord {
  long sweep = 0;
  ModelIndicator z;
  Eigen::VectorXd beta;
  double log_density = 0.0;
};
std::vector<SampleRecord> read_samples(std::istream& is);

// Matrix rows as CSV with the given column prefix (x_0, x_1, ...).
void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m, const std::string& prefix,
                      const std::string& config_hash, const std::string& index_name = "row");
Eigen::MatrixXd read_matrix_csv(std::istream& is);

// Posterior table CSV: model,log_weight,prob.
void write_table(std::ostream& os, const PosteriorTable& table, const std::string& config_hash);
PosteriorTable read_table(std::istream& is);

}  // namespace sslab
