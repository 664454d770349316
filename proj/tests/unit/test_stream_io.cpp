#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cdf/error.hpp"
#include "cdf/linalg.hpp"
#include "cdf/stream_io.hpp"
#include "doctest.h"

using namespace cdf;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& contents) {
  const auto dir = std::filesystem::temp_directory_path() / "cdf_stream_io_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << contents;
  return path;
}

Matrix stack_x(const std::vector<Shard>& shards) {
  Eigen::Index rows = 0;
  for (const auto& s : shards) rows += s.n();
  Matrix x(rows, shards.front().X.cols());
  Eigen::Index r = 0;
  for (const auto& s : shards) {
    x.middleRows(r, s.n()) = s.X;
    r += s.n();
  }
  return x;
}

Vector stack_y(const std::vector<Shard>& shards) {
  Eigen::Index rows = 0;
  for (const auto& s : shards) rows += s.n();
  Vector y(rows);
  Eigen::Index r = 0;
  for (const auto& s : shards) {
    y.segment(r, s.n()) = s.y;
    r += s.n();
  }
  return y;
}

double correlation(const Matrix& x, Eigen::Index a, Eigen::Index b) {
  const Vector u = x.col(a).array() - x.col(a).mean();
  const Vector v = x.col(b).array() - x.col(b).mean();
  return u.dot(v) / std::sqrt(u.squaredNorm() * v.squaredNorm());
}

}  // namespace

TEST_CASE("generators are pure in design and seed, and reset replays") {
  auto a = gen_linreg({}, RngStream(7, 1));
  auto b = gen_linreg({}, RngStream(7, 1));
  const auto sa = collect(*a.stream);
  const auto sb = collect(*b.stream);
  REQUIRE(sa.size() == 500);
  CHECK(sa.back().t == 500);
  CHECK(stack_x(sa) == stack_x(sb));
  CHECK(stack_y(sa) == stack_y(sb));
  a.stream->reset();
  CHECK(stack_y(collect(*a.stream)) == stack_y(sa));
  auto c = gen_linreg({}, RngStream(8, 1));
  CHECK(stack_y(collect(*c.stream)) != stack_y(sa));
}

TEST_CASE("noiseless linreg: pooled least squares recovers the coefficients") {
  LinRegDesign d;
  d.sigma = 0.0;
  d.horizon = 20;
  auto sim = gen_linreg(d, RngStream(3));
  const auto shards = collect(*sim.stream);
  const Matrix x = stack_x(shards);
  const Vector y = stack_y(shards);
  const Vector ols = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  CHECK((ols - d.beta).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(sim.truth.at("beta") == d.beta);
}

TEST_CASE("linreg predictors have uniform mean") {
  auto sim = gen_linreg({}, RngStream(11));
  const Matrix x = stack_x(collect(*sim.stream));
  const double se = std::sqrt(1.0 / 12.0 / static_cast<double>(x.size()));
  CHECK(std::abs(x.mean() - 0.5) < 3.0 * se);
  CHECK(x.minCoeff() > 0.0);
  CHECK(x.maxCoeff() < 1.0);
}

TEST_CASE("compressed predictors: rho = 0 independent, rho = 0.4 lag-one correlation") {
  RngStream rng(5);
  const Matrix indep = ar1_predictors(10000, 4, 0.0, rng);
  const double se = 1.0 / std::sqrt(10000.0);
  for (Eigen::Index j = 0; j + 1 < 4; ++j) CHECK(std::abs(correlation(indep, j, j + 1)) < 3.0 * se);
  const Matrix ar = ar1_predictors(10000, 6, 0.4, rng);
  const double se_rho = (1.0 - 0.16) / std::sqrt(10000.0);
  for (Eigen::Index j = 0; j + 1 < 6; ++j) CHECK(std::abs(correlation(ar, j, j + 1) - 0.4) < 3.0 * se_rho);
  CHECK(std::abs(correlation(ar, 0, 2) - 0.16) < 3.0 * se);
  CHECK_THROWS_AS(ar1_predictors(2, 2, 1.0, rng), ArgumentError);
}

TEST_CASE("compressed case layouts and test set") {
  const auto six = CompressedDesign::standard_case(6);
  CompressedDesign small = six;
  small.horizon = 2;
  auto sim = gen_compressed(small, RngStream(1, 1), RngStream(1, 2));
  CHECK(sim.truth.at("beta").size() == 500);
  CHECK((sim.truth.at("beta").array() == 0.10).all());
  CHECK(sim.x_test.rows() == kTestRows);
  CHECK(sim.y_test.size() == kTestRows);
  CHECK(collect(*sim.stream).front().X.rows() == 100);

  auto one = gen_compressed(CompressedDesign::standard_case(1), RngStream(1, 1), RngStream(1, 2));
  const Vector& beta = one.truth.at("beta");
  CHECK((beta.head(10).array().abs() <= 3.0).all());
  CHECK((beta.tail(490).array() == 0.0).all());
  CHECK(CompressedDesign::standard_case(4).p == 1000);
  CHECK(CompressedDesign::standard_case(4).rho == 0.4);
  CHECK_THROWS_AS(CompressedDesign::standard_case(7), ArgumentError);
}

TEST_CASE("dlm with no state noise follows a geometric path") {
  DlmDesign d;
  d.tau = 0.0;
  d.sigma = 0.0;
  d.horizon = 30;
  auto sim = gen_dlm(d, RngStream(2));
  const double theta0 = sim.truth.at("theta0")(0);
  const auto shards = collect(*sim.stream);
  REQUIRE(shards.size() == 30);
  for (std::size_t t = 0; t < shards.size(); ++t) {
    const double expected = std::pow(d.phi, static_cast<double>(t + 1)) * theta0;
    CHECK(shards[t].y(0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(sim.truth.at("theta")(static_cast<Eigen::Index>(t)) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("probit labels are balanced at zero coefficients and layouts match the cases") {
  ProbitDesign zero;
  zero.scenario = 0;
  zero.p = 5;
  zero.n = 1000;
  zero.horizon = 10;
  auto sim = gen_probit(zero, RngStream(4, 1), RngStream(4, 2));
  const Vector y = stack_y(collect(*sim.stream));
  CHECK((y.array().abs() == 1.0).all());
  const double share = (y.array() > 0.0).cast<double>().mean();
  CHECK(std::abs(share - 0.5) < 3.0 * std::sqrt(0.25 / 10000.0));

  auto one = gen_probit(ProbitDesign::case1(), RngStream(4, 1), RngStream(4, 2));
  const Vector& b1 = one.truth.at("beta");
  CHECK(b1.size() == 100);
  CHECK(b1(0) == 3.5);
  CHECK(b1(9) == 1.0);
  CHECK((b1.tail(90).array().abs() <= 0.75).all());
  auto two = gen_probit(ProbitDesign::case2(), RngStream(4, 1), RngStream(4, 2));
  const Vector& b2 = two.truth.at("beta");
  CHECK(b2.size() == 500);
  CHECK((b2.segment(10, 190).array().abs() <= 1.0 / 3.0).all());
  CHECK((b2.tail(300).array() == 0.0).all());
  const Matrix x = stack_x(collect(*one.stream));
  CHECK(x.rows() == 2500);
  CHECK(std::sqrt(x.array().square().mean()) == doctest::Approx(0.25).epsilon(0.02));
}

TEST_CASE("anova group effects cluster near 4 with spread 0.1") {
  AnovaDesign d;
  d.k = 400;
  d.horizon = 1;
  auto sim = gen_anova(d, RngStream(9));
  const Vector& zeta = sim.truth.at("zeta");
  const double mean = zeta.mean();
  const double sd = std::sqrt((zeta.array() - mean).square().sum() / (zeta.size() - 1));
  CHECK(std::abs(mean - 4.0) < 3.0 * 0.1 / std::sqrt(400.0));
  CHECK(sd == doctest::Approx(0.1).epsilon(0.15));
  const auto shards = collect(*sim.stream);
  CHECK(shards.front().n() == 4000);
  CHECK(shards.front().group[3999] == 399);
}

TEST_CASE("poisson sampler moments and generator layout") {
  RngStream rng(12);
  for (double rate : {0.5, 7.0, 250.0}) {
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const double k = sample_poisson(rate, rng);
      sum += k;
      sq += k * k;
    }
    const double mean = sum / n;
    CHECK(std::abs(mean - rate) < 4.0 * std::sqrt(rate / n));
    CHECK((sq / n - mean * mean) == doctest::Approx(rate).epsilon(0.05));
  }
  auto sim = gen_poisson({}, RngStream(13));
  const auto shards = collect(*sim.stream);
  CHECK(shards.front().Z.cols() == 10);
  CHECK((shards.front().Z.rowwise().sum().array() == 1.0).all());
  CHECK((shards.front().X.col(0).array() == 1.0).all());
}

TEST_CASE("csv round trip reproduces the generated matrix exactly") {
  LinRegDesign d;
  d.horizon = 7;
  auto sim = gen_linreg(d, RngStream(21));
  const auto shards = collect(*sim.stream);
  std::ostringstream out;
  write_shards_csv(out, shards);
  const auto path = temp_file("roundtrip.csv", out.str());
  CsvSchema schema;
  schema.response = "y";
  schema.binary_response = false;
  schema.standardize = false;
  schema.intercept = false;
  schema.shard_size = 10;
  CsvShardSource src(path.string(), schema);
  const auto back = collect(src);
  REQUIRE(back.size() == 7);
  CHECK(stack_x(back) == stack_x(shards));
  CHECK(stack_y(back) == stack_y(shards));
  CHECK(src.column_names() == std::vector<std::string>{"x1", "x2", "x3", "x4", "x5"});
}

TEST_CASE("42 categorical levels become 41 dummies with the first level dropped") {
  std::ostringstream csv;
  csv << "age,country,label\n";
  for (int i = 0; i < 84; ++i) csv << 20 + i % 7 << ",c" << (i % 42 < 10 ? "0" : "") << i % 42 << ',' << (i % 3 ? ">50K" : "<=50K") << '\n';
  const auto path = temp_file("levels.csv", csv.str());
  CsvSchema schema;
  schema.response = "label";
  schema.positive = ">50K";
  schema.negative = "<=50K";
  schema.categorical = {"country"};
  schema.shard_size = 84;
  CsvShardSource src(path.string(), schema);
  const auto shards = collect(src);
  REQUIRE(shards.size() == 1);
  CHECK(shards[0].X.cols() == 1 + 1 + 41);
  CHECK(src.column_names()[2] == "country=c01");
  CHECK(shards[0].X.row(0).tail(41).sum() == 0.0);  // level c00 is the baseline
  CHECK(shards[0].X(1, 2) == 1.0);
  CHECK(shards[0].y(0) == -1.0);
  CHECK(shards[0].y(1) == 1.0);
}

TEST_CASE("declared levels freeze the encoding") {
  const auto path = temp_file("frozen.csv", "a,g,y\n1,u,1\n2,v,0\n3,w,1\n");
  CsvSchema schema;
  schema.response = "y";
  schema.categorical = {"g"};
  schema.levels["g"] = {"u", "v"};
  CsvShardSource src(path.string(), schema);
  CHECK_THROWS_AS(collect(src), NewLevelError);
}

TEST_CASE("constant continuous column is dropped with a warning") {
  const auto path = temp_file("constant.csv", "a,b,y\n1,5,1\n2,5,0\n3,5,1\n4,5,0\n");
  CsvSchema schema;
  schema.response = "y";
  schema.shard_size = 2;
  CsvShardSource src(path.string(), schema);
  const auto shards = collect(src);
  REQUIRE(shards.size() == 2);
  CHECK(shards[0].X.cols() == 2);
  REQUIRE(src.warnings().size() == 1);
  CHECK(src.warnings()[0].find("'b'") != std::string::npos);
  CHECK(src.column_names() == std::vector<std::string>{"(Intercept)", "a"});
  CHECK(std::isfinite(shards[1].X.sum()));
}

TEST_CASE("rows with missing fields are dropped and malformed rows are located") {
  const auto path = temp_file("missing.csv", "a,y\n1,1\n?,0\n,1\n3,0\n");
  CsvSchema schema;
  schema.response = "y";
  schema.standardize = false;
  CsvShardSource src(path.string(), schema);
  const auto shards = collect(src);
  CHECK(shards[0].n() == 2);
  CHECK(src.rows_dropped() == 2);

  const auto bad = temp_file("bad.csv", "a,y\n1,1\n2\n");
  CsvShardSource bad_src(bad.string(), schema);
  try {
    collect(bad_src);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  const auto text = temp_file("text.csv", "a,y\n1,1\nabc,1\n");
  CsvShardSource text_src(text.string(), schema);
  CHECK_THROWS_AS(collect(text_src), ParseError);
}

TEST_CASE("streaming standardisation matches batch moments on the final shard") {
  RngStream rng(31);
  std::ostringstream csv;
  csv << "a,b,y\n";
  std::vector<double> a;
  for (int i = 0; i < 3000; ++i) {
    a.push_back(10.0 + 3.0 * rng.normal());
    csv.precision(17);
    csv << a.back() << ',' << rng.uniform() << ",1\n";
  }
  const auto path = temp_file("standardize.csv", csv.str());
  CsvSchema schema;
  schema.response = "y";
  schema.intercept = false;
  CsvShardSource src(path.string(), schema);
  const auto shards = collect(src);
  REQUIRE(shards.size() == 10);
  double mean = 0.0;
  for (double v : a) mean += v;
  mean /= static_cast<double>(a.size());
  double var = 0.0;
  for (double v : a) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(a.size() - 1));
  const Shard& last = shards.back();
  for (Eigen::Index i = 0; i < last.n(); ++i) {
    const double batch = (a[2700 + static_cast<std::size_t>(i)] - mean) / sd;
    CHECK(std::abs(last.X(i, 0) - batch) < 1e-6);
  }
}

TEST_CASE("schema file parsing rejects unknown keys") {
  const auto good = temp_file("schema.ini",
                              "[schema]\nresponse = income\ncategorical = country, sex\nshard_size = 300\n"
                              "positive = >50K\n[levels]\nsex = Female, Male\n");
  const auto s = CsvSchema::from_ini(good.string());
  CHECK(s.response == "income");
  CHECK(s.categorical == std::vector<std::string>{"country", "sex"});
  CHECK(s.levels.at("sex") == std::vector<std::string>{"Female", "Male"});
  CHECK(s.positive == ">50K");
  const auto bad = temp_file("bad_schema.ini", "[schema]\nresponse = y\nshard = 3\n");
  CHECK_THROWS_AS(CsvSchema::from_ini(bad.string()), ConfigError);
  CHECK(split_csv_line("a, \"b,c\" ,d") == std::vector<std::string>{"a", "b,c", "d"});
}
