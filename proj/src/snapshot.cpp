#include "cdf/snapshot.hpp"

#include <fstream>

#include "cdf/error.hpp"

namespace cdf {

struct SnapshotAccess {
  static std::map<std::string, SurrogateStat>& stats(SamplerState& s) { return s.scss_; }
  static void restore(SurrogateStat& s, Matrix value, std::size_t updates, std::size_t last) {
    s.value_ = std::move(value);
    s.updates_ = updates;
    s.last_t_ = last;
  }
};

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json values = json::array();
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) values.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", std::move(values)}};
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& values = j.at("values");
  if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
    throw ParseError(0, "snapshot: matrix value count does not match its shape");
  }
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = values[k++].get<double>();
  return m;
}

const char* shape_name(StatShape s) {
  switch (s) {
    case StatShape::kScalar: return "scalar";
    case StatShape::kVector: return "vector";
    case StatShape::kMatrix: return "matrix";
  }
  return "matrix";
}

}  // namespace

json snapshot_to_json(const SamplerState& state) {
  json j;
  j["version"] = kSnapshotVersion;
  j["t"] = state.t;
  const auto& r = state.rng.state();
  j["rng"] = {{"seed", r.seed},
              {"stream", r.stream},
              {"counter", r.counter},
              {"has_spare", r.has_spare},
              {"spare", r.spare}};
  json stats = json::array();
  for (const auto& [id, s] : state.scss()) {
    stats.push_back({{"id", id},
                     {"shape", shape_name(s.shape())},
                     {"updates", s.updates()},
                     {"last_update", s.last_update()},
                     {"value", matrix_to_json(s.value())}});
  }
  j["scss"] = std::move(stats);
  json est = json::object();
  for (const auto& [id, v] : state.estimates) est[id] = matrix_to_json(v);
  j["estimates"] = std::move(est);
  json aux = json::object();
  for (const auto& [k, m] : state.aux) aux[k] = matrix_to_json(m);
  j["aux"] = std::move(aux);
  return j;
}

SamplerState snapshot_from_json(const json& j) {
  const int version = j.at("version").get<int>();
  if (version != kSnapshotVersion) {
    throw ParseError(0, "snapshot: unsupported version " + std::to_string(version));
  }
  RngStream::State rs;
  const auto& r = j.at("rng");
  rs.seed = r.at("seed").get<std::uint64_t>();
  rs.stream = r.at("stream").get<std::uint64_t>();
  rs.counter = r.at("counter").get<std::uint64_t>();
  rs.has_spare = r.at("has_spare").get<bool>();
  rs.spare = r.at("spare").get<double>();
  SamplerState state{RngStream(rs)};
  state.t = j.at("t").get<std::size_t>();
  for (const auto& s : j.at("scss")) {
    const auto id = s.at("id").get<std::string>();
    const auto shape = s.at("shape").get<std::string>();
    Matrix value = matrix_from_json(s.at("value"));
    if (shape == "scalar") state.declare_scalar(id, value(0, 0));
    else if (shape == "vector") state.declare_vector(id, value.rows());
    else state.declare_matrix(id, value.rows(), value.cols());
    auto& stat = SnapshotAccess::stats(state).at(id);
    SnapshotAccess::restore(stat, std::move(value), s.at("updates").get<std::size_t>(),
                                 s.at("last_update").get<std::size_t>());
  }
  for (const auto& [id, v] : j.at("estimates").items()) {
    state.estimates[id] = matrix_from_json(v).col(0);
  }
  for (const auto& [k, m] : j.at("aux").items()) state.aux[k] = matrix_from_json(m);
  return state;
}

void save_snapshot(const SamplerState& state, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open snapshot for writing: " + path.string());
  out << snapshot_to_json(state).dump(1) << '\n';
}

SamplerState load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open snapshot: " + path.string());
  return snapshot_from_json(json::parse(in));
}

}  // namespace cdf
