#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cdf/distributions.hpp"
#include "cdf/engine.hpp"
#include "cdf/error.hpp"
#include "cdf/snapshot.hpp"

using namespace cdf;

namespace {

// One parameter drawn from a fixed N(0,1) regardless of data; one statistic
// counting observations.
class StandardNormalModel : public ModelHooks {
 public:
  std::string name() const override { return "std_normal"; }
  Partition partition() const override { return {{{"x"}}}; }
  void validate_shard(const Shard& shard, const SamplerState&) const override {
    if (shard.X.cols() != 1) throw ShardShapeError("need one column");
  }
  void initialize(SamplerState& state, const Shard&) override {
    state.declare_scalar("count");
    state.declare_matrix("sxx", 1, 1);
    state.estimates["x"] = Vector::Zero(1);
  }
  void update_scss(std::size_t, const Shard& shard, SamplerState& state) override {
    state.update_stat("count", [&](Matrix& c) { c(0, 0) += static_cast<double>(shard.n()); });
    state.update_stat("sxx", [&](Matrix& c) { c += shard.X.transpose() * shard.X; });
  }
  void sample(std::size_t, const Shard&, SamplerState& state, const EngineConfig& config,
              DrawBatch& batch) override {
    batch.resize("x", static_cast<Eigen::Index>(config.draws), 1);
    for_each_sweep(config, [&](long s) {
      const double v = state.rng.normal();
      if (s >= 0) batch.draws["x"](s, 0) = v;
    });
  }
};

class TwoGroupModel : public StandardNormalModel {
 public:
  std::vector<std::string> order;
  Partition partition() const override { return {{{"a"}, {"b"}}}; }
  void initialize(SamplerState&, const Shard&) override {}
  void update_scss(std::size_t g, const Shard&, SamplerState&) override {
    order.push_back("u" + std::to_string(g));
  }
  void sample(std::size_t g, const Shard&, SamplerState& state, const EngineConfig& config,
              DrawBatch& batch) override {
    order.push_back("s" + std::to_string(g));
    const std::string id = g == 0 ? "a" : "b";
    batch.resize(id, static_cast<Eigen::Index>(config.draws), 1);
    for (std::size_t s = 0; s < config.draws; ++s) batch.draws[id](s, 0) = state.rng.uniform();
  }
};

Shard column_shard(std::size_t t, std::initializer_list<double> xs) {
  Shard s;
  s.t = t;
  s.X.resize(static_cast<Eigen::Index>(xs.size()), 1);
  s.y = Vector::Zero(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double v : xs) s.X(i++, 0) = v;
  return s;
}

}  // namespace

TEST_CASE("partition validation") {
  Partition ok{{{"a", "b"}, {"c"}}};
  CHECK_NOTHROW(ok.validate({"a", "b", "c"}));
  Partition overlap{{{"a", "b"}, {"b"}}};
  CHECK_THROWS_AS(overlap.validate({"a", "b"}), ArgumentError);
  CHECK_THROWS_AS(ok.validate({"a", "b", "c", "d"}), ArgumentError);
}

TEST_CASE("S = 1 estimate equals the single draw") {
  StandardNormalModel m;
  SamplerState st(RngStream(1));
  EngineConfig cfg{1, 0};
  auto batch = step_shard(st, column_shard(1, {1.0}), m, cfg);
  CHECK(batch.draw_count() == 1);
  CHECK(st.scalar_estimate("x") == batch.at("x")(0, 0));
}

TEST_CASE("statistics update once per shard, never per sweep") {
  StandardNormalModel m;
  SamplerState st(RngStream(2));
  VectorShardSource src({column_shard(1, {1, 2}), column_shard(2, {3}), column_shard(3, {4})});
  auto batches = run_stream(src, m, EngineConfig{50, 10}, st);
  CHECK(batches.size() == 3);
  CHECK(st.stat("count").updates() == 3);
  CHECK(st.scalar("count") == 4.0);
  CHECK(st.stat("sxx").updates() == 3);
  std::size_t total = 0;
  for (const auto& b : batches) total += static_cast<std::size_t>(b.draw_count());
  CHECK(total == 3 * 50);
}

TEST_CASE("second update within a shard is refused") {
  SamplerState st;
  st.declare_scalar("c");
  st.t = 1;
  st.update_stat("c", [](Matrix& c) { c(0, 0) += 1; });
  CHECK_THROWS_AS(st.update_stat("c", [](Matrix& c) { c(0, 0) += 1; }), InvalidStateError);
  st.t = 2;
  CHECK_THROWS_AS(st.update_stat("c", [](Matrix& c) { c.resize(2, 2); }), InvalidStateError);
  st.t = 3;
  try {
    st.update_stat("c", [](Matrix& c) { c(0, 0) = std::nan(""); });
    FAIL("expected overflow error");
  } catch (const NumericOverflowError& e) {
    CHECK(e.stat_id() == "c");
  }
}

TEST_CASE("zero shard leaves order-free statistics unchanged") {
  StandardNormalModel m;
  SamplerState st(RngStream(3));
  step_shard(st, column_shard(1, {1.5, 2.0}), m, EngineConfig{5, 0});
  const double before = st.matrix("sxx")(0, 0);
  step_shard(st, column_shard(2, {0.0, 0.0}), m, EngineConfig{5, 0});
  CHECK(st.matrix("sxx")(0, 0) == before);
}

TEST_CASE("permuted shard order yields the same order-free statistic") {
  StandardNormalModel m1, m2;
  SamplerState a(RngStream(4)), b(RngStream(5));
  VectorShardSource s1({column_shard(1, {1, 2}), column_shard(2, {3, 4})});
  VectorShardSource s2({column_shard(1, {3, 4}), column_shard(2, {1, 2})});
  run_stream(s1, m1, EngineConfig{2, 0}, a);
  run_stream(s2, m2, EngineConfig{2, 0}, b);
  CHECK(a.matrix("sxx")(0, 0) == b.matrix("sxx")(0, 0));
}

TEST_CASE("groups are visited in declared order") {
  TwoGroupModel m;
  SamplerState st(RngStream(6));
  step_shard(st, column_shard(1, {1}), m, EngineConfig{3, 0});
  CHECK(m.order == std::vector<std::string>{"u0", "s0", "u1", "s1"});
  CHECK(st.estimates.contains("a"));
  CHECK(st.estimates.contains("b"));
}

TEST_CASE("errors carry the shard index") {
  StandardNormalModel m;
  SamplerState st(RngStream(7));
  Shard bad;
  bad.X = Matrix::Zero(2, 2);
  bad.y = Vector::Zero(2);
  VectorShardSource src({column_shard(1, {1}), bad});
  try {
    run_stream(src, m, EngineConfig{2, 0}, st);
    FAIL("expected StreamError");
  } catch (const StreamError& e) {
    CHECK(e.shard_index() == 2);
  }
  VectorShardSource empty({});
  CHECK_THROWS_AS(run_stream(empty, m, EngineConfig{2, 0}, st), ArgumentError);
}

TEST_CASE("metropolis step") {
  RngStream r(8);
  auto normal = [](double x) { return -0.5 * x * x; };
  for (int i = 0; i < 100; ++i) CHECK(metropolis_step(0.3, normal, RandomWalk{0.0}, r).value == 0.3);

  auto box = [](double x) {
    return std::abs(x) < 1.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  };
  for (int i = 0; i < 2000; ++i) {
    const auto res = metropolis_step(0.99, box, RandomWalk{0.5}, r);
    REQUIRE(std::abs(res.value) < 1.0);
  }
  CHECK_THROWS_AS(metropolis_step(2.0, box, RandomWalk{0.1}, r), InvalidStateError);

  double x = 0.0, s = 0.0, s2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    x = metropolis_step(x, normal, RandomWalk{1.0}, r).value;
    s += x;
    s2 += x * x;
  }
  const double mean = s / n;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(s2 / n - mean * mean - 1.0) < 0.05);
}

TEST_CASE("snapshot round trip is bit exact and resumes identically") {
  StandardNormalModel m;
  SamplerState st(RngStream(9, 3));
  step_shard(st, column_shard(1, {0.1, 0.7}), m, EngineConfig{4, 0});
  st.aux["window"] = Matrix::Constant(2, 3, 1.0 / 3.0);
  st.rng.normal();
  const auto path = std::filesystem::temp_directory_path() / "cdf_snapshot_test.json";
  save_snapshot(st, path);
  SamplerState back = load_snapshot(path);
  std::filesystem::remove(path);
  CHECK(back.t == st.t);
  CHECK(back.stat("sxx").updates() == st.stat("sxx").updates());
  CHECK(back.matrix("sxx")(0, 0) == st.matrix("sxx")(0, 0));
  CHECK((back.aux_at("window").array() == st.aux_at("window").array()).all());
  CHECK(back.scalar_estimate("x") == st.scalar_estimate("x"));

  StandardNormalModel m2;
  auto b1 = step_shard(st, column_shard(2, {0.3}), m, EngineConfig{4, 0});
  auto b2 = step_shard(back, column_shard(2, {0.3}), m2, EngineConfig{4, 0});
  CHECK((b1.at("x").array() == b2.at("x").array()).all());
  CHECK(snapshot_to_json(st).dump() == snapshot_to_json(back).dump());

  auto j = snapshot_to_json(st);
  j["version"] = 99;
  CHECK_THROWS_AS(snapshot_from_json(j), ParseError);
}
