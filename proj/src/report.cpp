#include "cdf/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cdf/error.hpp"
#include "cdf/kernels.hpp"
#include "cdf/stream_io.hpp"

namespace cdf {

namespace {

double read_value(const std::string& s, std::size_t line) {
  if (s == "NA" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, "'" + s + "' is not a number");
  }
}

std::size_t read_count(const std::string& s, std::size_t line) {
  const double v = read_value(s, line);
  if (!(v >= 0.0) || v != std::floor(v)) throw ParseError(line, "'" + s + "' is not a count");
  return static_cast<std::size_t>(v);
}

// Calls row(fields, line) for every data row after checking the header.
template <typename F>
void read_csv(const std::filesystem::path& path, const std::vector<std::string>& header, F row) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + " is empty");
  const auto got = split_csv_line(line);
  for (const auto& h : header)
    if (std::find(got.begin(), got.end(), h) == got.end())
      throw ConfigError(path.string() + " lacks required column '" + h + "'");
  if (got != header) throw ParseError(1, path.string() + ": unexpected column layout");
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) throw ParseError(n, "expected " + std::to_string(header.size()) + " fields");
    row(f, n);
  }
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Series {
  std::string label;
  std::vector<double> x, y;
};

const char* kPalette[] = {"#1b6ca8", "#d1495b", "#2e933c", "#edae49", "#6c4f9c", "#00798c", "#8c564b", "#444444"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string line_chart(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                       const std::string& ylabel, std::optional<std::pair<double, double>> yrange) {
  const double w = 720, h = 440, left = 70, right = 170, top = 40, bottom = 60;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (yrange) std::tie(y0, y1) = *yrange;
  if (x1 <= x0) { x0 -= 1.0; x1 += 1.0; }
  if (y1 <= y0) { y0 -= 1.0; y1 += 1.0; }
  const double pw = w - left - right, ph = h - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
    << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << left << "\" y=\"24\" font-size=\"15\">" << xml_escape(title) << "</text>\n"
    << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    o << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << fmt(top + ph + 18) << "\" text-anchor=\"middle\">"
      << xml_escape(format_number(std::round(xv * 1000.0) / 1000.0)) << "</text>\n";
    o << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(py(yv) + 4) << "\" text-anchor=\"end\">"
      << xml_escape(format_number(std::round(yv * 1000.0) / 1000.0)) << "</text>\n";
    o << "<line x1=\"" << fmt(left) << "\" x2=\"" << fmt(left + pw) << "\" y1=\"" << fmt(py(yv)) << "\" y2=\""
      << fmt(py(yv)) << "\" stroke=\"#ddd\"/>\n";
  }
  o << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(h - 15) << "\" text-anchor=\"middle\">"
    << xml_escape(xlabel) << "</text>\n"
    << "<text transform=\"translate(18," << fmt(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << xml_escape(ylabel) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* colour = kPalette[k % (sizeof kPalette / sizeof *kPalette)];
    if (s.x.size() == 1) {
      o << "<circle cx=\"" << fmt(px(s.x[0])) << "\" cy=\"" << fmt(py(s.y[0])) << "\" r=\"4\" fill=\"" << colour
        << "\"/>\n";
    } else {
      o << "<polyline fill=\"none\" stroke-width=\"1.6\" stroke=\"" << colour << "\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) o << (i ? " " : "") << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i]));
      o << "\"/>\n";
    }
    const double ly = top + 14 + 18.0 * static_cast<double>(k);
    o << "<line x1=\"" << fmt(left + pw + 12) << "\" x2=\"" << fmt(left + pw + 32) << "\" y1=\"" << fmt(ly - 4)
      << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << fmt(left + pw + 38) << "\" y=\"" << fmt(ly) << "\">" << xml_escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace

std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path) {
  std::vector<MetricRow> rows;
  read_csv(path, {"rep", "t", "algorithm", "metric", "parameter", "value", "stderr", "flag"},
           [&](const std::vector<std::string>& f, std::size_t line) {
             MetricRow r;
             r.rep = static_cast<int>(read_count(f[0], line));
             r.t = read_count(f[1], line);
             r.algorithm = f[2];
             r.metric = f[3];
             r.parameter = f[4];
             r.value = read_value(f[5], line);
             r.stderr_ = read_value(f[6], line);
             r.flag = f[7];
             rows.push_back(std::move(r));
           });
  return rows;
}

std::vector<DrawRow> read_draws_csv(const std::filesystem::path& path) {
  std::vector<DrawRow> rows;
  read_csv(path, {"rep", "t", "algorithm", "parameter", "draw", "value"},
           [&](const std::vector<std::string>& f, std::size_t line) {
             rows.push_back({static_cast<int>(read_count(f[0], line)), read_count(f[1], line), f[2], f[3],
                             read_count(f[4], line), read_value(f[5], line)});
           });
  return rows;
}

std::vector<TableColumn> table_layout(const std::string& id) {
  if (id == "tab1")
    return {{"coverage", "avg_coverage", "beta", 0}, {"length", "avg_length", "beta", 0}, {"time", "time", "", 0},
            {"mse_200", "mse", "beta", 200},     {"mse_400", "mse", "beta", 400}, {"mse_500", "mse", "beta", 500}};
  if (id == "tab2")
    return {{"coverage", "avg_coverage", "zeta", 0}, {"length", "avg_length", "zeta", 0}, {"time", "time", "", 0},
            {"mse_200", "mse", "zeta", 200},       {"mse_400", "mse", "zeta", 400},       {"mse_500", "mse", "zeta", 500}};
  if (id == "tab3")
    return {{"mse", "mse", "theta", 0},         {"coverage", "coverage", "theta", 0}, {"length", "length", "theta", 0},
            {"phi_error", "abs_error", "phi", 0}, {"time", "time", "", 0}};
  if (id == "tab5")
    return {{"mse", "mse", "beta", 0},          {"mse10", "mse", "beta[1:10]", 0},
            {"coverage", "coverage", "beta", 0}, {"length", "length", "beta", 0},
            {"misclassification", "misclassification", "test", 0}, {"time", "time", "", 0},
            {"memory_bytes", "memory_bytes", "retained", 0}};
  if (id == "tab6")
    return {{"mspe", "mspe", "test", 0}, {"memory_bytes", "memory_bytes", "retained", 0}, {"time", "time", "", 0}};
  if (id == "tab7")
    return {{"relative_mse_100", "relative_mse", "gamma", 100}, {"relative_mse_200", "relative_mse", "gamma", 200}};
  if (id == "tab8") return {{"draws_until_mspe", "ess_until", "", 0}};
  if (id == "tab9")
    return {{"coverage", "coverage", "predictive", 0}, {"length", "length", "predictive", 0}};
  throw ConfigError("unknown table id '" + id + "' (tab1, tab2, tab3, tab5, tab6, tab7, tab8, tab9)");
}

std::string make_table(const std::string& table_id, const std::vector<std::filesystem::path>& run_dirs,
                       std::uint64_t seed) {
  const auto layout = table_layout(table_id);
  // values[algorithm][column] over replications
  std::map<std::string, std::map<std::string, std::vector<double>>> values;
  std::set<std::string> algorithms;
  for (const auto& dir : run_dirs) {
    if (!std::filesystem::exists(dir / "metrics.csv")) continue;  // missing cell: NA
    const auto rows = read_metrics_csv(dir / "metrics.csv");
    std::map<std::pair<int, std::string>, std::size_t> last;
    for (const auto& r : rows) {
      if (r.algorithm == "both") continue;
      algorithms.insert(r.algorithm);
      auto& l = last[{r.rep, r.algorithm}];
      l = std::max(l, r.t);
    }
    for (const auto& col : layout) {
      if (col.metric == "time") continue;
      for (const auto& r : rows) {
        if (r.metric != col.metric || r.algorithm == "both") continue;
        if (!col.parameter.empty() && r.parameter != col.parameter) continue;
        const std::size_t want = col.t == 0 ? last[{r.rep, r.algorithm}] : col.t;
        if (r.t == want) values[r.algorithm][col.name].push_back(r.value);
      }
    }
    if (std::filesystem::exists(dir / "manifest.json")) {
      std::ifstream in(dir / "manifest.json");
      const auto m = nlohmann::json::parse(in, nullptr, false);
      if (!m.is_discarded() && m.contains("seconds"))
        for (const auto& [alg, secs] : m["seconds"].items())
          for (const auto& s : secs) values[alg]["time"].push_back(s.get<double>());
    }
  }
  std::ostringstream out;
  out << "algorithm";
  for (const auto& col : layout) out << ',' << col.name << ',' << col.name << "_se";
  out << '\n';
  RngStream rng(seed, 0x7ab1e);
  for (const auto& alg : algorithms) {
    out << alg;
    for (const auto& col : layout) {
      const auto& v = values[alg][col.name];
      if (v.empty()) {
        out << ",NA,NA";
        continue;
      }
      const MeanWithSe m = bootstrap_mean(v, rng);
      out << ',' << format_number(m.mean) << ',' << format_number(m.se);
    }
    out << '\n';
  }
  return out.str();
}

std::string accuracy_svg(const std::vector<MetricRow>& metrics, const std::vector<std::string>& parameters) {
  std::map<std::string, std::map<std::size_t, std::pair<double, int>>> acc;
  for (const auto& r : metrics) {
    if (r.metric != "accuracy" || !std::isfinite(r.value)) continue;
    if (!parameters.empty() && std::find(parameters.begin(), parameters.end(), r.parameter) == parameters.end())
      continue;
    auto& cell = acc[r.parameter][r.t];
    cell.first += r.value;
    cell.second += 1;
  }
  if (acc.empty()) throw ConfigError("no accuracy rows to plot (run with algorithm = both)");
  std::vector<Series> series;
  for (const auto& [param, by_t] : acc) {
    Series s;
    s.label = param;
    for (const auto& [t, cell] : by_t) {
      s.x.push_back(static_cast<double>(t));
      s.y.push_back(cell.first / cell.second);
    }
    series.push_back(std::move(s));
  }
  return line_chart(series, "Accuracy of approximate against exact posterior", "t", "accuracy",
                    std::make_pair(0.0, 1.0));
}

std::string density_svg(const std::vector<DrawRow>& draws, const std::string& parameter,
                        const std::vector<std::size_t>& times) {
  std::map<std::pair<std::string, std::size_t>, std::vector<double>> groups;
  for (const auto& d : draws) {
    if (d.parameter != parameter) continue;
    if (!times.empty() && std::find(times.begin(), times.end(), d.t) == times.end()) continue;
    groups[{d.algorithm, d.t}].push_back(d.value);
  }
  if (groups.empty()) throw ConfigError("no draws of '" + parameter + "' to plot");
  double lo = INFINITY, hi = -INFINITY, hmax = 0.0;
  for (const auto& [key, v] : groups) {
    lo = std::min(lo, *std::min_element(v.begin(), v.end()));
    hi = std::max(hi, *std::max_element(v.begin(), v.end()));
    hmax = std::max(hmax, silverman_bandwidth(v));
  }
  if (hmax == 0.0) hmax = std::max(1e-3, 0.05 * std::abs(lo));
  lo -= 3.0 * hmax;
  hi += 3.0 * hmax;
  std::vector<double> grid(256);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = lo + (hi - lo) * static_cast<double>(i) / 255.0;
  std::vector<Series> series;
  for (const auto& [key, v] : groups) {
    double h = silverman_bandwidth(v);
    if (h == 0.0) h = hmax;
    std::vector<double> dens(grid.size());
    kernels::kde_on_grid(v, h, grid, dens);
    series.push_back({key.first + " t=" + std::to_string(key.second), grid, dens});
  }
  return line_chart(series, "Posterior density of " + parameter, parameter, "density", std::nullopt);
}

}  // namespace cdf
