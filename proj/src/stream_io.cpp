#include "cdf/stream_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "cdf/distributions.hpp"
#include "cdf/error.hpp"

namespace cdf {

std::optional<Shard> GeneratedStream::next() {
  if (t_ >= horizon_) return std::nullopt;
  ++t_;
  Shard shard = make_(t_, rng_);
  shard.t = t_;
  return shard;
}

void GeneratedStream::reset() {
  t_ = 0;
  rng_ = start_;
}

namespace {

std::shared_ptr<GeneratedStream> make_stream(std::size_t horizon, RngStream rng,
                                             GeneratedStream::Maker make) {
  return std::make_shared<GeneratedStream>(horizon, rng, std::move(make));
}

}  // namespace

Simulation gen_linreg(const LinRegDesign& d, RngStream rng) {
  if (d.n <= 0 || d.beta.size() == 0 || d.sigma < 0.0) throw ArgumentError("gen_linreg: bad design");
  Simulation sim;
  sim.truth["beta"] = d.beta;
  sim.truth["sigma2"] = Vector::Constant(1, d.sigma * d.sigma);
  sim.stream = make_stream(d.horizon, rng, [d](std::size_t, RngStream& r) {
    Shard s;
    s.X.resize(d.n, d.beta.size());
    for (Eigen::Index i = 0; i < d.n; ++i)
      for (Eigen::Index j = 0; j < d.beta.size(); ++j) s.X(i, j) = r.uniform();
    s.y = s.X * d.beta;
    for (Eigen::Index i = 0; i < d.n; ++i) s.y(i) += d.sigma * r.normal();
    return s;
  });
  return sim;
}

Simulation gen_anova(const AnovaDesign& d, RngStream rng) {
  if (d.k <= 0 || d.n <= 0 || d.tau2 < 0.0 || d.sigma < 0.0) throw ArgumentError("gen_anova: bad design");
  Simulation sim;
  Vector zeta(d.k);
  for (int i = 0; i < d.k; ++i) zeta(i) = d.mu + std::sqrt(d.tau2) * rng.normal();
  sim.truth["zeta"] = zeta;
  sim.truth["mu"] = Vector::Constant(1, d.mu);
  sim.truth["tau2"] = Vector::Constant(1, d.tau2);
  sim.truth["sigma2"] = Vector::Constant(1, d.sigma * d.sigma);
  sim.stream = make_stream(d.horizon, rng, [d, zeta](std::size_t, RngStream& r) {
    Shard s;
    const Eigen::Index rows = static_cast<Eigen::Index>(d.k) * d.n;
    s.y.resize(rows);
    s.group.resize(static_cast<std::size_t>(rows));
    s.X.resize(rows, 0);
    for (int i = 0; i < d.k; ++i) {
      for (int j = 0; j < d.n; ++j) {
        const Eigen::Index row = static_cast<Eigen::Index>(i) * d.n + j;
        s.group[static_cast<std::size_t>(row)] = i;
        s.y(row) = zeta(i) + d.sigma * r.normal();
      }
    }
    return s;
  });
  return sim;
}

Simulation gen_dlm(const DlmDesign& d, RngStream rng) {
  if (std::abs(d.phi) >= 1.0 || d.tau < 0.0 || d.sigma < 0.0) throw ArgumentError("gen_dlm: bad design");
  Simulation sim;
  const double stationary_sd = d.tau / std::sqrt(1.0 - d.phi * d.phi);
  double theta = d.tau > 0.0 ? stationary_sd * rng.normal() : rng.normal();
  const double theta0 = theta;
  Vector path(static_cast<Eigen::Index>(d.horizon));
  Vector obs(static_cast<Eigen::Index>(d.horizon));
  for (Eigen::Index t = 0; t < path.size(); ++t) {
    theta = d.phi * theta + d.tau * rng.normal();
    path(t) = theta;
    obs(t) = theta + d.sigma * rng.normal();
  }
  sim.truth["theta"] = path;
  sim.truth["theta0"] = Vector::Constant(1, theta0);
  sim.truth["phi"] = Vector::Constant(1, d.phi);
  sim.truth["tau2"] = Vector::Constant(1, d.tau * d.tau);
  sim.truth["sigma2"] = Vector::Constant(1, d.sigma * d.sigma);
  sim.stream = make_stream(d.horizon, rng, [obs](std::size_t t, RngStream&) {
    Shard s;
    s.y = Vector::Constant(1, obs(static_cast<Eigen::Index>(t) - 1));
    return s;
  });
  return sim;
}

namespace {

Vector probit_coefficients(const ProbitDesign& d, RngStream& rng) {
  static const double lead[10] = {3.5, -3.5, -2.0, 2.0, -1.5, 1.5, -1.5, 1.5, -1.0, 1.0};
  Vector beta = Vector::Zero(d.p);
  for (Eigen::Index j = 0; j < std::min<Eigen::Index>(10, d.p); ++j) beta(j) = lead[j];
  if (d.scenario == 1) {
    for (Eigen::Index j = 10; j < d.p; ++j) beta(j) = -0.75 + 1.5 * rng.uniform();
  } else if (d.scenario == 2) {
    for (Eigen::Index j = 10; j < std::min<Eigen::Index>(200, d.p); ++j)
      beta(j) = -1.0 / 3.0 + (2.0 / 3.0) * rng.uniform();
  } else if (d.scenario != 0) {
    throw ArgumentError("gen_probit: scenario must be 0, 1 or 2");
  }
  return beta;
}

void probit_rows(const Vector& beta, double x_sd, Eigen::Index rows, RngStream& rng, Matrix& x, Vector& y) {
  x.resize(rows, beta.size());
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < beta.size(); ++j) x(i, j) = x_sd * rng.normal();
  const Vector eta = x * beta;
  y.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) y(i) = rng.uniform() < std_normal_cdf(eta(i)) ? 1.0 : -1.0;
}

}  // namespace

Simulation gen_probit(const ProbitDesign& d, RngStream data_rng, RngStream test_rng) {
  if (d.p <= 0 || d.n <= 0 || d.x_sd <= 0.0) throw ArgumentError("gen_probit: bad design");
  Simulation sim;
  const Vector beta = probit_coefficients(d, data_rng);
  sim.truth["beta"] = beta;
  probit_rows(beta, d.x_sd, kTestRows, test_rng, sim.x_test, sim.y_test);
  sim.stream = make_stream(d.horizon, data_rng, [d, beta](std::size_t, RngStream& r) {
    Shard s;
    probit_rows(beta, d.x_sd, d.n, r, s.X, s.y);
    return s;
  });
  return sim;
}

CompressedDesign CompressedDesign::standard_case(int id) {
  CompressedDesign d;
  switch (id) {
    case 1: d.rho = 0.1; d.p = 500; d.nonzero = 10; break;
    case 2: d.rho = 0.1; d.p = 1000; d.nonzero = 10; break;
    case 3: d.rho = 0.4; d.p = 500; d.nonzero = 10; break;
    case 4: d.rho = 0.4; d.p = 1000; d.nonzero = 10; break;
    case 5: d.rho = 0.1; d.p = 500; d.nonzero = 500; break;
    case 6: d.rho = 0.1; d.p = 500; d.nonzero = 500; d.high_signal = false; break;
    default: throw ArgumentError("compressed case must be in 1..6");
  }
  return d;
}

Matrix ar1_predictors(Eigen::Index rows, Eigen::Index p, double rho, RngStream& rng) {
  if (rho < 0.0 || rho >= 1.0) throw ArgumentError("ar1_predictors: rho must lie in [0, 1)");
  const double innovation = std::sqrt(1.0 - rho * rho);
  Matrix x(rows, p);
  for (Eigen::Index i = 0; i < rows; ++i) {
    double prev = rng.normal();
    x(i, 0) = prev;
    for (Eigen::Index j = 1; j < p; ++j) {
      prev = rho * prev + innovation * rng.normal();
      x(i, j) = prev;
    }
  }
  return x;
}

Simulation gen_compressed(const CompressedDesign& d, RngStream data_rng, RngStream test_rng) {
  if (d.p <= 0 || d.n <= 0 || d.nonzero < 0 || d.nonzero > d.p || d.sigma2 < 0.0)
    throw ArgumentError("gen_compressed: bad design");
  Simulation sim;
  Vector beta = Vector::Zero(d.p);
  for (Eigen::Index j = 0; j < d.nonzero; ++j) beta(j) = d.high_signal ? -3.0 + 6.0 * data_rng.uniform() : 0.10;
  sim.truth["beta"] = beta;
  sim.truth["sigma2"] = Vector::Constant(1, d.sigma2);
  const double sd = std::sqrt(d.sigma2);
  auto rows = [d, beta, sd](Eigen::Index count, RngStream& r, Matrix& x, Vector& y) {
    x = ar1_predictors(count, d.p, d.rho, r);
    y = x * beta;
    for (Eigen::Index i = 0; i < count; ++i) y(i) += sd * r.normal();
  };
  rows(kTestRows, test_rng, sim.x_test, sim.y_test);
  sim.stream = make_stream(d.horizon, data_rng, [d, rows](std::size_t, RngStream& r) {
    Shard s;
    rows(d.n, r, s.X, s.y);
    return s;
  });
  return sim;
}

double sample_poisson(double rate, RngStream& rng) {
  if (!(rate >= 0.0) || !std::isfinite(rate)) throw ArgumentError("sample_poisson: rate must be finite and >= 0");
  double total = 0.0;
  while (rate > 0.0) {
    const double piece = std::min(rate, 100.0);
    rate -= piece;
    double prob = std::exp(-piece);
    double cdf = prob;
    const double u = rng.uniform();
    double k = 0.0;
    while (u > cdf && prob > 0.0) {
      k += 1.0;
      prob *= piece / k;
      cdf += prob;
    }
    total += k;
  }
  return total;
}

Simulation gen_poisson(const PoissonDesign& d, RngStream rng) {
  if (d.n <= 0 || d.levels <= 0 || d.beta.size() == 0 || d.sigma_u < 0.0)
    throw ArgumentError("gen_poisson: bad design");
  Simulation sim;
  Vector u(d.levels);
  for (int g = 0; g < d.levels; ++g) u(g) = d.sigma_u * rng.normal();
  sim.truth["beta"] = d.beta;
  sim.truth["u"] = u;
  sim.truth["sigma2"] = Vector::Constant(1, d.sigma_u * d.sigma_u);
  sim.stream = make_stream(d.horizon, rng, [d, u](std::size_t, RngStream& r) {
    Shard s;
    s.X.resize(d.n, d.beta.size());
    s.Z = Matrix::Zero(d.n, d.levels);
    s.y.resize(d.n);
    s.group.resize(static_cast<std::size_t>(d.n));
    for (Eigen::Index i = 0; i < d.n; ++i) {
      s.X(i, 0) = 1.0;
      for (Eigen::Index j = 1; j < d.beta.size(); ++j) s.X(i, j) = 0.5 * r.normal();
      const int g = std::min(d.levels - 1, static_cast<int>(r.uniform() * d.levels));
      s.group[static_cast<std::size_t>(i)] = g;
      s.Z(i, g) = 1.0;
      s.y(i) = sample_poisson(std::exp(s.X.row(i).dot(d.beta) + u(g)), r);
    }
    return s;
  });
  return sim;
}

// ---------------------------------------------------------------- CSV

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("schema key '" + key + "' expects true/false, got '" + v + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& field) { return field.empty() || field == "?" || field == "NA"; }

bool parse_double(const std::string& text, double& out) {
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace

CsvSchema CsvSchema::from_ini(const std::string& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("schema " + path + ": " + e.what());
  }
  CsvSchema schema;
  for (const auto& [section, body] : tree) {
    if (section == "schema") {
      for (const auto& [key, node] : body) {
        const std::string v = node.data();
        if (key == "response") schema.response = v;
        else if (key == "continuous") schema.continuous = split_list(v);
        else if (key == "categorical") schema.categorical = split_list(v);
        else if (key == "binary_response") schema.binary_response = parse_bool(key, v);
        else if (key == "positive") schema.positive = v;
        else if (key == "negative") schema.negative = v;
        else if (key == "shard_size") {
          try {
            const long n = std::stol(v);
            if (n <= 0) throw std::invalid_argument("non-positive");
            schema.shard_size = static_cast<std::size_t>(n);
          } catch (const std::exception&) {
            throw ConfigError("schema key 'shard_size' expects a positive integer, got '" + v + "'");
          }
        } else if (key == "standardize") schema.standardize = parse_bool(key, v);
        else if (key == "intercept") schema.intercept = parse_bool(key, v);
        else throw ConfigError("unknown schema key '" + key + "'");
      }
    } else if (section == "levels") {
      for (const auto& [key, node] : body) schema.levels[key] = split_list(node.data());
    } else {
      throw ConfigError("unknown schema section '" + section + "'");
    }
  }
  if (schema.response.empty()) throw ConfigError("schema must name a response column");
  return schema;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"' && trim(cur).empty()) {
      cur.clear();
      quoted = true;
      was_quoted = true;
    } else if (was_quoted && (c == ' ' || c == '\t')) {
      continue;
    } else if (c == ',') {
      fields.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw ArgumentError("unterminated quoted field");
  fields.push_back(was_quoted ? cur : trim(cur));
  return fields;
}

struct CsvShardSource::Column {
  enum class Kind { ignored, response, continuous, categorical } kind = Kind::ignored;
  std::vector<std::string> levels;
  std::map<std::string, int> index;
  bool frozen = false;
};

CsvShardSource::CsvShardSource(const std::string& path, CsvSchema schema) : schema_(std::move(schema)) {
  auto file = std::make_unique<std::ifstream>(path);
  if (!*file) throw StreamError(0, "cannot open " + path);
  std::string line;
  if (!std::getline(*file, line)) throw ParseError(1, "missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  header_ = split_csv_line(line);

  std::set<std::string> seen;
  for (const auto& h : header_)
    if (!seen.insert(h).second) throw ParseError(1, "duplicate column '" + h + "'");
  auto require = [&](const std::string& name) {
    if (!seen.count(name)) throw ConfigError("schema column '" + name + "' not in header");
  };
  require(schema_.response);
  for (const auto& c : schema_.categorical) require(c);
  for (const auto& c : schema_.continuous) require(c);
  for (const auto& [name, lv] : schema_.levels) {
    require(name);
    if (std::find(schema_.categorical.begin(), schema_.categorical.end(), name) == schema_.categorical.end())
      throw ConfigError("levels given for non-categorical column '" + name + "'");
  }

  columns_.resize(header_.size());
  bool prescan = false;
  for (std::size_t j = 0; j < header_.size(); ++j) {
    const std::string& h = header_[j];
    Column& col = columns_[j];
    const bool cat = std::find(schema_.categorical.begin(), schema_.categorical.end(), h) != schema_.categorical.end();
    const bool cont = schema_.continuous.empty()
                          ? true
                          : std::find(schema_.continuous.begin(), schema_.continuous.end(), h) != schema_.continuous.end();
    if (h == schema_.response) {
      col.kind = Column::Kind::response;
      response_index_ = static_cast<int>(j);
    } else if (cat) {
      col.kind = Column::Kind::categorical;
      if (auto it = schema_.levels.find(h); it != schema_.levels.end()) {
        col.levels = it->second;
        col.frozen = true;
      } else {
        prescan = true;
      }
    } else if (cont) {
      col.kind = Column::Kind::continuous;
    }
  }

  // Undeclared levels are collected in one pass and sorted, so the dropped baseline
  // level does not depend on row order.
  if (prescan) {
    std::vector<std::set<std::string>> found(header_.size());
    std::size_t ln = 1;
    while (std::getline(*file, line)) {
      ++ln;
      if (trim(line).empty()) continue;
      std::vector<std::string> f;
      try {
        f = split_csv_line(line);
      } catch (const ArgumentError& e) {
        throw ParseError(ln, e.what());
      }
      if (f.size() != header_.size()) continue;  // reported with its line number on the main pass
      for (std::size_t j = 0; j < f.size(); ++j)
        if (columns_[j].kind == Column::Kind::categorical && !columns_[j].frozen && !is_missing(f[j]))
          found[j].insert(f[j]);
    }
    for (std::size_t j = 0; j < header_.size(); ++j)
      if (columns_[j].kind == Column::Kind::categorical && !columns_[j].frozen)
        columns_[j].levels.assign(found[j].begin(), found[j].end());
    file = std::make_unique<std::ifstream>(path);
    std::getline(*file, line);
  }
  for (auto& col : columns_) {
    col.frozen = col.kind == Column::Kind::categorical;
    for (std::size_t l = 0; l < col.levels.size(); ++l) col.index[col.levels[l]] = static_cast<int>(l);
  }
  in_ = std::move(file);

  if (schema_.intercept) names_.push_back("(Intercept)");
  for (std::size_t j = 0; j < header_.size(); ++j)
    if (columns_[j].kind == Column::Kind::continuous) names_.push_back(header_[j]);
  for (std::size_t j = 0; j < header_.size(); ++j)
    if (columns_[j].kind == Column::Kind::categorical)
      for (std::size_t l = 1; l < columns_[j].levels.size(); ++l)
        names_.push_back(header_[j] + "=" + columns_[j].levels[l]);
}

CsvShardSource::~CsvShardSource() = default;

// Raw features are laid out continuous first, then dummies, in header order.
bool CsvShardSource::read_row(std::vector<double>& features, double& response) {
  std::string line;
  while (std::getline(*in_, line)) {
    ++line_;
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    try {
      f = split_csv_line(line);
    } catch (const ArgumentError& e) {
      throw ParseError(line_, e.what());
    }
    if (f.size() != header_.size())
      throw ParseError(line_, "expected " + std::to_string(header_.size()) + " fields, found " + std::to_string(f.size()));
    bool missing = false;
    for (std::size_t j = 0; j < f.size(); ++j)
      if (columns_[j].kind != Column::Kind::ignored && is_missing(f[j])) missing = true;
    if (missing) {
      ++dropped_;
      continue;
    }
    features.clear();
    const std::string& label = f[static_cast<std::size_t>(response_index_)];
    if (schema_.binary_response) {
      if (label == schema_.positive) response = 1.0;
      else if (schema_.negative.empty() || label == schema_.negative) response = -1.0;
      else throw ParseError(line_, "response label '" + label + "' is neither '" + schema_.positive + "' nor '" + schema_.negative + "'");
    } else if (!parse_double(label, response)) {
      throw ParseError(line_, "response '" + label + "' is not a number");
    }
    for (std::size_t j = 0; j < f.size(); ++j) {
      if (columns_[j].kind != Column::Kind::continuous) continue;
      double v;
      if (!parse_double(f[j], v)) throw ParseError(line_, "column '" + header_[j] + "': '" + f[j] + "' is not a number");
      features.push_back(v);
    }
    for (std::size_t j = 0; j < f.size(); ++j) {
      const Column& col = columns_[j];
      if (col.kind != Column::Kind::categorical) continue;
      const auto it = col.index.find(f[j]);
      if (it == col.index.end()) throw NewLevelError("line " + std::to_string(line_) + ": column '" + header_[j] + "' has unknown level '" + f[j] + "'");
      for (std::size_t l = 1; l < col.levels.size(); ++l) features.push_back(it->second == static_cast<int>(l) ? 1.0 : 0.0);
    }
    return true;
  }
  return false;
}

std::optional<Shard> CsvShardSource::next() {
  std::vector<std::vector<double>> rows;
  std::vector<double> ys;
  std::vector<double> features;
  double response = 0.0;
  while (rows.size() < schema_.shard_size && read_row(features, response)) {
    rows.push_back(features);
    ys.push_back(response);
  }
  if (rows.empty()) return std::nullopt;

  std::size_t n_cont = 0;
  for (const auto& col : columns_)
    if (col.kind == Column::Kind::continuous) ++n_cont;
  const std::size_t raw = rows.front().size();

  if (first_shard_) {
    keep_.assign(raw, true);
    mean_.assign(n_cont, 0.0);
    m2_.assign(n_cont, 0.0);
    if (schema_.standardize) {
      for (std::size_t j = 0; j < n_cont; ++j) {
        const bool constant = std::all_of(rows.begin(), rows.end(), [&](const auto& r) { return r[j] == rows.front()[j]; });
        if (constant) {
          keep_[j] = false;
          const std::string& name = names_[j + (schema_.intercept ? 1 : 0)];
          warnings_.push_back("column '" + name + "' is constant in the first shard and was dropped");
        }
      }
      std::vector<std::string> kept;
      if (schema_.intercept) kept.push_back(names_.front());
      for (std::size_t j = 0; j < raw; ++j)
        if (keep_[j]) kept.push_back(names_[j + (schema_.intercept ? 1 : 0)]);
      names_ = std::move(kept);
    }
    first_shard_ = false;
  }

  // Running moments include the current shard, so every shard is scaled with the
  // best estimate available when it arrives.
  if (schema_.standardize) {
    for (const auto& r : rows) {
      count_ += 1.0;
      for (std::size_t j = 0; j < n_cont; ++j) {
        const double delta = r[j] - mean_[j];
        mean_[j] += delta / count_;
        m2_[j] += delta * (r[j] - mean_[j]);
      }
    }
  }

  const std::size_t kept = static_cast<std::size_t>(std::count(keep_.begin(), keep_.end(), true));
  const Eigen::Index cols = static_cast<Eigen::Index>(kept + (schema_.intercept ? 1 : 0));
  Shard shard;
  shard.t = ++t_;
  shard.X.resize(static_cast<Eigen::Index>(rows.size()), cols);
  shard.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    Eigen::Index c = 0;
    if (schema_.intercept) shard.X(ii, c++) = 1.0;
    for (std::size_t j = 0; j < raw; ++j) {
      if (!keep_[j]) continue;
      double v = rows[i][j];
      if (schema_.standardize && j < n_cont) {
        const double sd = count_ > 1.0 ? std::sqrt(m2_[j] / (count_ - 1.0)) : 0.0;
        v -= mean_[j];
        if (sd > 0.0) v /= sd;
      }
      shard.X(ii, c++) = v;
    }
    shard.y(ii) = ys[i];
  }
  return shard;
}

void write_shards_csv(std::ostream& out, const std::vector<Shard>& shards) {
  if (shards.empty()) return;
  const Eigen::Index p = shards.front().X.cols();
  const Eigen::Index q = shards.front().Z.cols();
  const bool grouped = !shards.front().group.empty();
  for (Eigen::Index j = 0; j < p; ++j) out << 'x' << j + 1 << ',';
  for (Eigen::Index j = 0; j < q; ++j) out << 'z' << j + 1 << ',';
  if (grouped) out << "group,";
  out << "y\n";
  std::ostringstream buf;
  buf << std::setprecision(17);
  for (const auto& s : shards) {
    if (s.X.cols() != p || s.Z.cols() != q || (!s.group.empty()) != grouped)
      throw ShardShapeError("write_shards_csv: shard layout changes within the stream");
    for (Eigen::Index i = 0; i < s.n(); ++i) {
      buf.str("");
      for (Eigen::Index j = 0; j < p; ++j) buf << s.X(i, j) << ',';
      for (Eigen::Index j = 0; j < q; ++j) buf << s.Z(i, j) << ',';
      if (grouped) buf << s.group[static_cast<std::size_t>(i)] << ',';
      buf << s.y(i) << '\n';
      out << buf.str();
    }
  }
}

std::vector<Shard> collect(ShardSource& source) {
  std::vector<Shard> out;
  while (auto s = source.next()) out.push_back(std::move(*s));
  return out;
}

}  // namespace cdf
