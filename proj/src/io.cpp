#include "sslab/io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "sslab/error.hpp"

namespace sslab {

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, const std::string& what) {
  // from_chars, unlike stod, accepts subnormals.
  const char* first = s.data();
  if (!s.empty() && s[0] == '+') ++first;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError("cannot parse number for " + what + ": '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

// Next line that is neither blank nor a '#' comment.
bool next_data_line(std::istream& is, std::string& line) {
  while (std::getline(is, line)) {
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    line = t;
    return true;
  }
  return false;
}

void write_hash(std::ostream& os, const std::string& config_hash) {
  if (!config_hash.empty()) os << "# config_hash=" << config_hash << '\n';
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": bad section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    c.set(section.empty() ? key : section + "." + key, trim(line.substr(eq + 1)));
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Config::set(const std::string& key, const std::string& value) { entries_[key] = value; }

bool Config::has(const std::string& key) const { return entries_.count(key) > 0; }

const std::string* Config::find(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto* v = find(key);
  return v ? *v : fallback;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto* v = find(key);
  return v ? parse_double(*v, key) : fallback;
}

long Config::get_long(const std::string& key, long fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  long out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size())
    throw ConfigError("cannot parse integer for " + key + ": '" + *v + "'");
  return out;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size())
    throw ConfigError("cannot parse unsigned integer for " + key + ": '" + *v + "'");
  return out;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("cannot parse boolean for " + key + ": '" + *v + "'");
}

void Config::require_all_used() const {
  std::string unused;
  for (const auto& [k, v] : entries_)
    if (!used_.count(k)) unused += (unused.empty() ? "" : ", ") + k;
  if (!unused.empty()) throw ConfigError("unknown config keys: " + unused);
}

void Config::require_known(const std::set<std::string>& known) const {
  std::string unknown;
  for (const auto& [k, v] : entries_)
    if (!known.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
  if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

void write_dataset(std::ostream& os, const Dataset& data, const std::string& config_hash) {
  write_hash(os, config_hash);
  os << data.n() << ' ' << data.p() << ' ' << format_double(data.sigma_hint) << '\n';
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.p(); ++j) os << format_double(data.X(i, j)) << ' ';
    os << format_double(data.y[i]) << '\n';
  }
}

Dataset read_dataset(std::istream& is) {
  std::string line;
  if (!next_data_line(is, line)) throw ConfigError("dataset: missing header");
  std::istringstream hs(line);
  long n = 0, p = 0;
  std::string sigma_text;
  if (!(hs >> n >> p >> sigma_text) || n < 1 || p < 1) throw ConfigError("dataset: bad header '" + line + "'");
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  for (long i = 0; i < n; ++i) {
    if (!next_data_line(is, line)) throw DimensionError("dataset: fewer rows than header n");
    std::istringstream rs(line);
    std::string tok;
    long col = 0;
    while (rs >> tok) {
      if (col > p) throw DimensionError("dataset: row " + std::to_string(i) + " has too many values");
      const double v = parse_double(tok, "dataset value");
      if (col < p) X(i, col) = v; else y[i] = v;
      ++col;
    }
    if (col != p + 1) throw DimensionError("dataset: row " + std::to_string(i) + " has wrong length");
  }
  if (next_data_line(is, line)) throw DimensionError("dataset: more rows than header n");
  Dataset d(std::move(X), std::move(y));
  d.sigma_hint = parse_double(sigma_text, "sigma");
  return d;
}

void save_dataset(const std::string& path, const Dataset& data, const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  write_dataset(out, data, config_hash);
  if (data.truth) {
    std::ofstream t(path + ".truth");
    if (!t) throw ConfigError("cannot write " + path + ".truth");
    write_truth(t, *data.truth, config_hash);
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset " + path);
  Dataset d = read_dataset(in);
  std::ifstream t(path + ".truth");
  if (t) {
    Truth truth = read_truth(t);
    if (truth.beta_star.size() != d.p()) throw DimensionError("truth sidecar length differs from p");
    d.truth = std::move(truth);
  }
  return d;
}

void write_truth(std::ostream& os, const Truth& truth, const std::string& config_hash) {
  write_hash(os, config_hash);
  os << truth.beta_star.size() << '\n';
  for (Eigen::Index j = 0; j < truth.beta_star.size(); ++j)
    os << format_double(truth.beta_star[j]) << ' ' << (truth.z_star[static_cast<int>(j)] ? 1 : 0) << '\n';
}

Truth read_truth(std::istream& is) {
  std::string line;
  if (!next_data_line(is, line)) throw ConfigError("truth: missing header");
  const long p = std::stol(line);
  if (p < 1) throw ConfigError("truth: bad header");
  Truth t;
  t.beta_star.resize(p);
  t.z_star = ModelIndicator(static_cast<int>(p));
  for (long j = 0; j < p; ++j) {
    if (!next_data_line(is, line)) throw DimensionError("truth: fewer rows than p");
    std::istringstream rs(line);
    std::string b;
    int z = 0;
    if (!(rs >> b >> z)) throw ConfigError("truth: bad row");
    t.beta_star[j] = parse_double(b, "truth value");
    t.z_star.set(static_cast<int>(j), z != 0);
  }
  return t;
}

SampleWriter::SampleWriter(std::ostream& os, int p, const std::string& config_hash) : os_(&os), p_(p) {
  write_hash(os, config_hash);
  os << "sweep,z";
  for (int j = 0; j < p; ++j) os << ",beta_" << j;
  os << ",log_density\n";
}

void SampleWriter::write(const Sample& s) {
  if (s.state.beta.size() != p_) throw DimensionError("sample writer: beta length differs from p");
  auto& os = *os_;
  os << s.sweep << ',' << s.state.z.to_string();
  for (int j = 0; j < p_; ++j) os << ',' << format_double(s.state.beta[j]);
  os << ',' << format_double(s.log_density) << '\n';
}

std::vector<SampleRecord> read_samples(std::istream& is) {
  std::string line;
  if (!next_data_line(is, line)) throw ConfigError("samples: missing header");
  const auto header = split(line, ',');
  if (header.size() < 3 || header[0] != "sweep" || header[1] != "z")
    throw ConfigError("samples: unexpected header");
  const auto p = static_cast<Eigen::Index>(header.size() - 3);
  std::vector<SampleRecord> out;
  while (next_data_line(is, line)) {
    const auto f = split(line, ',');
    if (f.size() != header.size()) throw DimensionError("samples: row length differs from header");
    SampleRecord r;
    r.sweep = std::stol(f[0]);
    r.z = ModelIndicator::from_string(f[1]);
    if (r.z.size() != p) throw DimensionError("samples: z length differs from beta count");
    r.beta.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) r.beta[j] = parse_double(f[static_cast<std::size_t>(j + 2)], "beta");
    r.log_density = parse_double(f.back(), "log_density");
    out.push_back(std::move(r));
  }
  return out;
}

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m, const std::string& prefix,
                      const std::string& config_hash, const std::string& index_name) {
  write_hash(os, config_hash);
  os << index_name;
  for (Eigen::Index j = 0; j < m.cols(); ++j) os << ',' << prefix << j;
  os << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << i;
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << ',' << format_double(m(i, j));
    os << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(std::istream& is) {
  std::string line;
  if (!next_data_line(is, line)) throw ConfigError("matrix csv: missing header");
  const auto cols = static_cast<Eigen::Index>(split(line, ',').size()) - 1;
  std::vector<std::vector<double>> rows;
  while (next_data_line(is, line)) {
    const auto f = split(line, ',');
    if (static_cast<Eigen::Index>(f.size()) != cols + 1) throw DimensionError("matrix csv: ragged row");
    std::vector<double> r;
    for (std::size_t j = 1; j < f.size(); ++j) r.push_back(parse_double(f[j], "matrix value"));
    rows.push_back(std::move(r));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  return m;
}

void write_table(std::ostream& os, const PosteriorTable& table, const std::string& config_hash) {
  write_hash(os, config_hash);
  os << "model,log_weight,prob\n";
  for (std::size_t i = 0; i < table.size(); ++i)
    os << table.models()[i].to_string() << ',' << format_double(table.log_weights()[i]) << ','
       << format_double(table.probs()[i]) << '\n';
}

PosteriorTable read_table(std::istream& is) {
  std::string line;
  if (!next_data_line(is, line)) throw ConfigError("table: missing header");
  if (split(line, ',').at(0) != "model") throw ConfigError("table: unexpected header");
  std::vector<ModelIndicator> models;
  std::vector<double> logw;
  while (next_data_line(is, line)) {
    const auto f = split(line, ',');
    if (f.size() != 3) throw DimensionError("table: bad row");
    models.push_back(ModelIndicator::from_string(f[0]));
    logw.push_back(parse_double(f[1], "log_weight"));
  }
  if (models.empty()) throw ConfigError("table: no rows");
  const int p = models.front().size();
  return PosteriorTable(p, std::move(models), std::move(logw));
}

}  // namespace sslab
