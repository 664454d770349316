#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cdf/linalg.hpp"
#include "cdf/rng.hpp"
#include "cdf/shard.hpp"

namespace cdf {

// Lazily generated stream; shard t is a pure function of the initial RNG state and t.
// reset() replays the identical stream, so paired algorithms see the same data.
class GeneratedStream final : public ShardSource {
 public:
  using Maker = std::function<Shard(std::size_t t, RngStream& rng)>;

  GeneratedStream(std::size_t horizon, RngStream rng, Maker make)
      : horizon_(horizon), start_(rng), rng_(rng), make_(std::move(make)) {}

  std::optional<Shard> next() override;
  void reset();
  std::size_t horizon() const { return horizon_; }

 private:
  std::size_t horizon_;
  std::size_t t_ = 0;
  RngStream start_;
  RngStream rng_;
  Maker make_;
};

// A simulated experiment: the stream, the true parameter values by parameter id,
// and an optional held-out test set.
struct Simulation {
  std::shared_ptr<GeneratedStream> stream;
  std::map<std::string, Vector> truth;
  Matrix x_test;
  Vector y_test;
};

inline constexpr Eigen::Index kTestRows = 1000;

struct LinRegDesign {
  Eigen::Index n = 10;
  std::size_t horizon = 500;
  Vector beta = (Vector(5) << 1.00, 0.50, 0.25, -1.00, 0.75).finished();
  double sigma = 5.0;
};
// x_ij ~ U(0, 1), y = x'beta + N(0, sigma^2).
Simulation gen_linreg(const LinRegDesign& d, RngStream rng);

struct AnovaDesign {
  int k = 10;
  int n = 10;  // observations per group per shard
  std::size_t horizon = 500;
  double mu = 4.0;
  double tau2 = 0.01;
  double sigma = 10.0;
};
// zeta_i ~ N(mu, tau2) drawn once; y_ij ~ N(zeta_i, sigma^2).
Simulation gen_anova(const AnovaDesign& d, RngStream rng);

struct DlmDesign {
  std::size_t horizon = 3000;
  double phi = 0.8;
  double tau = 1.4142135623730951;
  double sigma = 0.1;
};
// theta_0 from the stationary law, theta_t = phi theta_{t-1} + N(0, tau^2), y_t = theta_t + N(0, sigma^2).
// truth["theta"] holds theta_1..theta_T.
Simulation gen_dlm(const DlmDesign& d, RngStream rng);

struct ProbitDesign {
  int scenario = 1;  // 1: p = 100, n = 25; 2: p = 500, n = 100
  Eigen::Index p = 100;
  Eigen::Index n = 25;
  std::size_t horizon = 100;
  double x_sd = 0.25;
  static ProbitDesign case1() { return {}; }
  static ProbitDesign case2() { return {2, 500, 100, 100, 0.25}; }
};
// Leading coefficients (3.5, -3.5, -2, 2, -1.5, 1.5, -1.5, 1.5, -1, 1); scenario 1 draws the rest
// from U(-3/4, 3/4), scenario 2 draws 11..200 from U(-1/3, 1/3) and zeros the rest.
// x_ij ~ N(0, x_sd^2), y = +1 with probability Phi(x'beta), else -1. Includes a test set.
Simulation gen_probit(const ProbitDesign& d, RngStream data_rng, RngStream test_rng);

struct CompressedDesign {
  double rho = 0.1;
  Eigen::Index p = 500;
  Eigen::Index nonzero = 10;
  bool high_signal = true;  // U(-3, 3) coefficients; otherwise every nonzero is 0.10
  Eigen::Index n = 100;
  std::size_t horizon = 500;
  double sigma2 = 4.0;
  // Cases 1*-4* are sparse with high signal; 5 is dense high signal; 6 is dense low signal.
  static CompressedDesign standard_case(int id);
};
// x ~ N(0, R), R_jk = rho^|j-k| (AR(1) recursion, i.e. the bidiagonal Cholesky factor of R^{-1}),
// y ~ N(x'beta, sigma2). Test set of kTestRows rows from the same law.
Simulation gen_compressed(const CompressedDesign& d, RngStream data_rng, RngStream test_rng);
Matrix ar1_predictors(Eigen::Index rows, Eigen::Index p, double rho, RngStream& rng);

struct PoissonDesign {
  Eigen::Index n = 100;
  std::size_t horizon = 50;
  Vector beta = (Vector(2) << 0.5, 0.3).finished();  // intercept and one N(0, 1/4) covariate
  int levels = 10;
  double sigma_u = 0.5;
};
// y ~ Poisson(exp(x'beta + u_g)) with a uniformly drawn level g per row.
Simulation gen_poisson(const PoissonDesign& d, RngStream rng);

// Exact Poisson variate: sequential inversion, rates above 100 split into additive pieces.
double sample_poisson(double rate, RngStream& rng);

// CSV ingestion schema (INI file, see docs/config.md).
struct CsvSchema {
  std::string response;
  std::vector<std::string> continuous;   // empty: every column that is neither response nor categorical
  std::vector<std::string> categorical;
  // Declared levels freeze the encoding; undeclared categorical columns are pre-scanned.
  std::map<std::string, std::vector<std::string>> levels;
  bool binary_response = true;
  std::string positive = "1";  // response label mapped to +1
  std::string negative;        // when set, any label other than positive/negative is an error
  std::size_t shard_size = 300;
  bool standardize = true;
  bool intercept = true;

  static CsvSchema from_ini(const std::string& path);
};

// Streams shards from a CSV file with header row. Rows with an empty or "?" field are
// skipped; continuous columns are standardised with running moments that include the
// current shard; categorical columns are one-hot encoded without their first level.
class CsvShardSource final : public ShardSource {
 public:
  CsvShardSource(const std::string& path, CsvSchema schema);
  ~CsvShardSource() override;

  std::optional<Shard> next() override;
  const std::vector<std::string>& column_names() const { return names_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  std::size_t rows_dropped() const { return dropped_; }

 private:
  struct Column;
  bool read_row(std::vector<double>& features, double& response);

  CsvSchema schema_;
  std::unique_ptr<std::istream> in_;
  std::size_t line_ = 1;
  std::size_t t_ = 0;
  std::size_t dropped_ = 0;
  std::vector<std::string> header_;
  std::vector<Column> columns_;
  int response_index_ = -1;
  std::vector<std::string> names_;
  std::vector<std::string> warnings_;
  bool first_shard_ = true;
  std::vector<bool> keep_;
  std::vector<double> mean_, m2_;
  double count_ = 0.0;
};

// Splits one CSV record; double-quoted fields may contain commas.
std::vector<std::string> split_csv_line(const std::string& line);

// Writes shards as CSV with columns x1..xp[, z1..zq][, group], y.
void write_shards_csv(std::ostream& out, const std::vector<Shard>& shards);

std::vector<Shard> collect(ShardSource& source);

}  // namespace cdf
