#include <cmath>
#include <vector>

#include "cdf/distributions.hpp"
#include "cdf/engine.hpp"
#include "cdf/error.hpp"
#include "cdf/models/compressed.hpp"
#include "cdf/models/linreg.hpp"
#include "cdf/models/probit.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cdf;

namespace {

std::vector<Shard> gaussian_shards(std::size_t count, Eigen::Index n, const Vector& beta, double sd,
                                   RngStream& rng) {
  std::vector<Shard> out;
  for (std::size_t t = 0; t < count; ++t) {
    Shard s;
    s.t = t + 1;
    s.X.resize(n, beta.size());
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < beta.size(); ++j) s.X(i, j) = rng.uniform();
    s.y = s.X * beta;
    for (Eigen::Index i = 0; i < n; ++i) s.y(i) += sd * rng.normal();
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Shard> probit_shards(std::size_t count, Eigen::Index n, const Vector& beta, RngStream& rng) {
  std::vector<Shard> out;
  for (std::size_t t = 0; t < count; ++t) {
    Shard s;
    s.t = t + 1;
    s.X.resize(n, beta.size());
    s.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < beta.size(); ++j) s.X(i, j) = rng.normal();
      s.y(i) = s.X.row(i).dot(beta) + rng.normal() > 0.0 ? 1.0 : -1.0;
    }
    out.push_back(std::move(s));
  }
  return out;
}

Matrix stack_x(const std::vector<Shard>& shards) {
  Eigen::Index rows = 0;
  for (const auto& s : shards) rows += s.n();
  Matrix x(rows, shards.front().p());
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

// Drives the hooks of one shard with every estimate held at `frozen`.
void fold_with_frozen_estimates(ModelHooks& model, SamplerState& state, const Shard& shard,
                                const std::map<ParamId, Vector>& frozen) {
  if (state.t == 0) model.initialize(state, shard);
  ++state.t;
  for (const auto& [id, v] : frozen) state.estimates[id] = v;
  for (std::size_t g = 0; g < model.partition().size(); ++g) model.update_scss(g, shard, state);
}

}  // namespace

TEST_CASE("linreg beta conditional closed forms") {
  const auto c = linreg_beta_conditional(Matrix::Constant(1, 1, 3.0), Vector::Constant(1, 2.0));
  CHECK(c.mean(0) == doctest::Approx(0.5));
  CHECK(c.cov(0, 0) == doctest::Approx(0.25));
  const auto prior = linreg_beta_conditional(Matrix::Zero(3, 3), Vector::Zero(3));
  CHECK(prior.mean.isZero());
  CHECK(prior.cov.isApprox(Matrix::Identity(3, 3)));
}

TEST_CASE("linreg beta draws match the conditional moments") {
  Matrix c11(2, 2);
  c11 << 3.0, 1.0, 1.0, 2.0;
  const Vector c12 = (Vector(2) << 1.0, -2.0).finished();
  const auto cond = linreg_beta_conditional(c11, c12);
  RngStream rng(41);
  const int n = 100000;
  Vector sum = Vector::Zero(2);
  Matrix sq = Matrix::Zero(2, 2);
  const SpdMatrix cov(cond.cov);
  for (int i = 0; i < n; ++i) {
    const Vector d = sample_mvn(cond.mean, cov, rng);
    sum += d;
    sq += (d - cond.mean) * (d - cond.mean).transpose();
  }
  const Vector mean = sum / n;
  for (int j = 0; j < 2; ++j) {
    CHECK(std::abs(mean(j) - cond.mean(j)) < 4.0 * std::sqrt(cond.cov(j, j) / n));
    // var of the sample variance of a normal is 2 sigma^4 / n
    CHECK(std::abs(sq(j, j) / n - cond.cov(j, j)) < 4.0 * cond.cov(j, j) * std::sqrt(2.0 / n));
  }
}

TEST_CASE("linreg sigma2 conditional") {
  const LinRegPrior prior;
  const auto p0 = linreg_sigma2_conditional(prior, 0, 0, 0, 0);
  CHECK(p0.shape == 1.0);
  CHECK(p0.rate == 1.0);
  // noiseless fit at the truth: residual term vanishes, shape grows with nt
  const auto fit = linreg_sigma2_conditional(prior, 1000, 42.0, 42.0, 42.0);
  CHECK(fit.rate == doctest::Approx(1.0));
  CHECK(fit.shape == doctest::Approx(501.0));
  CHECK(fit.mean() < 0.01);
  CHECK_THROWS_AS(linreg_sigma2_conditional(prior, 10, 0.0, 5.0, 0.0), DegeneracyError);
}

TEST_CASE("linreg SCSS equal direct products and concatenated data") {
  RngStream rng(3);
  const Vector beta = (Vector(3) << 1.0, -0.5, 2.0).finished();
  auto shards = gaussian_shards(4, 10, beta, 1.0, rng);
  LinRegCdf model(3);
  model.freeze_sigma2(2.0);
  SamplerState state(RngStream(1));
  const EngineConfig cfg{20, 0};
  step_shard(state, shards[0], model, cfg);
  CHECK((state.matrix("C11") - shards[0].X.transpose() * shards[0].X / 2.0).norm() < 1e-12);
  for (std::size_t t = 1; t < shards.size(); ++t) step_shard(state, shards[t], model, cfg);
  const Matrix x = stack_x(shards);
  const Vector y = stack_y(shards);
  CHECK((state.matrix("C11") - x.transpose() * x / 2.0).norm() < 1e-10);
  CHECK((state.vector("C12") - x.transpose() * y / 2.0).norm() < 1e-10);
  CHECK(state.scalar("SYY") == doctest::Approx(y.squaredNorm()));
  CHECK(state.scalar("nt") == 40.0);
  // frozen sigma2 = c gives Sigma_t = (SXX / c + I)^{-1}
  const auto cond = linreg_beta_conditional(state.matrix("C11"), state.vector("C12"));
  const Matrix direct = (x.transpose() * x / 2.0 + Matrix::Identity(3, 3)).inverse();
  CHECK((cond.cov - direct).cwiseAbs().maxCoeff() < 1e-10);
  for (const auto& [id, stat] : state.scss()) CHECK(stat.updates() == shards.size());
}

TEST_CASE("linreg frozen sigma2 reproduces the exact conjugate beta posterior") {
  RngStream rng(4);
  const Vector beta = (Vector(2) << 0.7, -1.2).finished();
  auto shards = gaussian_shards(1, 30, beta, 0.5, rng);
  const double s2 = 0.25;
  LinRegCdf model(2);
  model.freeze_sigma2(s2);
  SamplerState state(RngStream(2));
  step_shard(state, shards[0], model, EngineConfig{10, 0});
  const auto cond = linreg_beta_conditional(state.matrix("C11"), state.vector("C12"));
  const Matrix& x = shards[0].X;
  const Matrix cov = (x.transpose() * x / s2 + Matrix::Identity(2, 2)).inverse();
  const Vector mean = cov * x.transpose() * shards[0].y / s2;
  CHECK((cond.cov - cov).norm() < 1e-12);
  CHECK((cond.mean - mean).norm() < 1e-12);
}

TEST_CASE("linreg zero shard leaves the statistics unchanged") {
  RngStream rng(5);
  auto shards = gaussian_shards(1, 10, Vector::Ones(2), 1.0, rng);
  Shard zero;
  zero.t = 2;
  zero.X = Matrix::Zero(10, 2);
  zero.y = Vector::Zero(10);
  LinRegCdf model(2);
  SamplerState state(RngStream(3));
  step_shard(state, shards[0], model, EngineConfig{30, 0});
  const Matrix c11 = state.matrix("C11");
  const Vector c12 = state.vector("C12");
  const double syy = state.scalar("SYY");
  step_shard(state, zero, model, EngineConfig{30, 0});
  CHECK(state.matrix("C11") == c11);
  CHECK(state.vector("C12") == c12);
  CHECK(state.scalar("SYY") == syy);
}

TEST_CASE("linreg exact sampler: one observation with unit variance") {
  Shard s;
  s.t = 1;
  s.X = Matrix::Ones(1, 1);
  s.y = Vector::Ones(1);
  LinRegExact model(1);
  model.fix_sigma2(1.0);
  SamplerState state(RngStream(11));
  const int n = 40000;
  const auto batch = step_shard(state, s, model, EngineConfig{static_cast<std::size_t>(n), 0});
  const Vector d = batch.at("beta").col(0);
  const double mean = d.mean();
  const double var = (d.array() - mean).square().sum() / (n - 1);
  CHECK(std::abs(mean - 0.5) < 4.0 * std::sqrt(0.5 / n));
  CHECK(std::abs(var - 0.5) < 4.0 * 0.5 * std::sqrt(2.0 / n));
}

TEST_CASE("linreg exact sampler matches the grid posterior") {
  RngStream rng(12);
  auto shards = gaussian_shards(1, 20, Vector::Ones(1), 1.0, rng);
  const Matrix& x = shards[0].X;
  const Vector& y = shards[0].y;
  LinRegExact model(1);
  SamplerState state(RngStream(13));
  const auto batch = step_shard(state, shards[0], model, EngineConfig{10000, 200});
  const LinRegPrior prior;
  const double n = static_cast<double>(y.size());
  auto log_post = [&](double b) {
    const double rss = (y - x.col(0) * b).squaredNorm();
    return -0.5 * b * b - (prior.a + 0.5 * n) * std::log(prior.b + 0.5 * rss);
  };
  const auto draws = test::column_values(batch.at("beta"));
  CHECK(test::grid_tv(draws, log_post, -4.0, 6.0) < 0.05);
}

TEST_CASE("linreg exact: one batch equals shard by shard") {
  RngStream rng(14);
  auto shards = gaussian_shards(5, 8, Vector::Ones(2), 1.0, rng);
  LinRegExact a(2), b(2);
  SamplerState sa(RngStream(1)), sb(RngStream(1));
  for (const auto& s : shards) step_shard(sa, s, a, EngineConfig{5, 0});
  Shard all;
  all.t = 1;
  all.X = stack_x(shards);
  all.y = stack_y(shards);
  step_shard(sb, all, b, EngineConfig{5, 0});
  CHECK((sa.matrix("SXX") - sb.matrix("SXX")).norm() < 1e-10);
  CHECK((sa.vector("SXY") - sb.vector("SXY")).norm() < 1e-10);
  CHECK(sa.scalar("SYY") == doctest::Approx(sb.scalar("SYY")));
}

TEST_CASE("linreg C-DF converges on the regression design") {
  RngStream rng(15);
  const Vector beta = (Vector(5) << 1.0, 0.5, 0.25, -1.0, 0.75).finished();
  auto shards = gaussian_shards(500, 10, beta, 5.0, rng);
  LinRegCdf model(5);
  SamplerState state(RngStream(16));
  VectorShardSource src(shards);
  run_stream(src, model, EngineConfig{50, 0}, state, [](const DrawBatch&, const SamplerState&) {});
  CHECK(std::abs(state.scalar_estimate("sigma2") - 25.0) < 2.5);
  CHECK(mse(state.estimate("beta"), beta) < 0.3);
}

TEST_CASE("probit frozen score and prediction") {
  CHECK(probit_frozen_score(0.0, 1.0) == doctest::Approx(0.797885).epsilon(1e-6));
  CHECK(probit_frozen_score(0.0, -1.0) == doctest::Approx(-0.797885).epsilon(1e-6));
  const Matrix x = Matrix::Ones(3, 2);
  CHECK(probit_predict(Matrix::Zero(5, 2), x).isApprox(Vector::Constant(3, 0.5)));
  Matrix one(1, 1);
  one << 1.2816;
  CHECK(probit_predict(one, Matrix::Ones(1, 1))(0) == doctest::Approx(0.90).epsilon(1e-4));
  CHECK(probit_default_budget(100) == 461);
}

TEST_CASE("probit rejects bad labels and oversize shards") {
  Shard s;
  s.t = 1;
  s.X = Matrix::Zero(3, 2);
  s.y = (Vector(3) << 1.0, 0.0, -1.0).finished();
  ProbitCdf model(2, 10);
  SamplerState state;
  CHECK_THROWS_AS(model.validate_shard(s, state), ShardShapeError);
  s.y = Vector::Ones(3);
  ProbitCdf small(2, 2);
  CHECK_THROWS_AS(small.validate_shard(s, state), ShardShapeError);
}

TEST_CASE("probit surrogate plus window scores reproduce the full-data score") {
  RngStream rng(21);
  const Vector beta = (Vector(3) << 1.0, -0.5, 0.3).finished();
  auto shards = probit_shards(6, 4, beta, rng);
  const Vector frozen = (Vector(3) << 0.4, 0.1, -0.2).finished();
  ProbitCdf model(3, 8);
  SamplerState state;
  for (const auto& s : shards) fold_with_frozen_estimates(model, state, s, {{"beta", frozen}});
  const Matrix& xw = state.aux_at("Xw");
  const Matrix& yw = state.aux_at("yw");
  CHECK(xw.rows() == 8);
  const Matrix x = stack_x(shards);
  const Vector y = stack_y(shards);
  // FIFO: the window is the most recent rows
  CHECK(xw == x.bottomRows(8));
  auto score = [&](const Matrix& m, const Matrix& labels) {
    Vector out = Vector::Zero(3);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      out += probit_frozen_score(m.row(i).dot(frozen), labels(i, 0)) * m.row(i).transpose();
    return out;
  };
  const Vector surrogate = state.vector("C") + score(xw, yw);
  const Vector full = score(x, Matrix(y));
  CHECK((surrogate - full).norm() < 1e-12);
  CHECK((state.matrix("SXX") - x.transpose() * x).norm() < 1e-10);
}

TEST_CASE("probit SigmaXX refreshes once per shard and full budget never folds") {
  RngStream rng(22);
  auto shards = probit_shards(5, 10, Vector::Ones(2), rng);
  ProbitCdf model(2, 100);
  SamplerState state(RngStream(5));
  VectorShardSource src(shards);
  run_stream(src, model, EngineConfig{40, 0}, state, [](const DrawBatch&, const SamplerState&) {});
  CHECK(ProbitCdf::sigma_updates(state) == 5);
  CHECK(state.stat("SXX").updates() == 5);
  CHECK(state.vector("C").isZero());
  const Matrix x = stack_x(shards);
  CHECK((state.aux_at("SigmaXX") - (x.transpose() * x + Matrix::Identity(2, 2)).inverse()).norm() < 1e-12);
}

TEST_CASE("probit exact sampler matches the grid posterior for one observation") {
  Shard s;
  s.t = 1;
  s.X = Matrix::Ones(1, 1);
  s.y = Vector::Ones(1);
  ProbitExact model(1);
  SamplerState state(RngStream(31));
  const auto batch = step_shard(state, s, model, EngineConfig{10000, 100});
  auto log_post = [](double b) { return -0.5 * b * b + std::log(std_normal_cdf(b)); };
  CHECK(test::grid_tv(test::column_values(batch.at("beta")), log_post, -5.0, 5.0) < 0.05);
}

TEST_CASE("probit exact with an empty shard draws from the prior") {
  Shard s;
  s.t = 1;
  s.X = Matrix(0, 1);
  s.y = Vector(0);
  ProbitExact model(1);
  SamplerState state(RngStream(32));
  const auto batch = step_shard(state, s, model, EngineConfig{20000, 0});
  const Vector d = batch.at("beta").col(0);
  CHECK(std::abs(d.mean()) < 4.0 / std::sqrt(20000.0));
}

TEST_CASE("probit budgeted sampler agrees with exact when the budget covers the stream") {
  RngStream rng(23);
  const Vector beta = (Vector(2) << 1.0, -1.0).finished();
  auto shards = probit_shards(4, 25, beta, rng);
  ProbitCdf cdf(2, 100);
  ProbitExact exact(2);
  SamplerState a(RngStream(7)), b(RngStream(7));
  DrawBatch last_a, last_b;
  for (const auto& s : shards) {
    last_a = step_shard(a, s, cdf, EngineConfig{2000, 0});
    last_b = step_shard(b, s, exact, EngineConfig{2000, 0});
  }
  for (Eigen::Index j = 0; j < 2; ++j) {
    CHECK(accuracy_tv(test::column_values(last_a.at("beta"), j), test::column_values(last_b.at("beta"), j)) > 0.9);
  }
}

TEST_CASE("compressed conditional reduces to conjugate regression for m = p = 1") {
  const auto c = compressed_beta_sigma(Matrix::Constant(1, 1, 4.0), Vector::Constant(1, 6.0), 20.0, 5.0);
  CHECK(c.mean(0) == doctest::Approx(1.2));
  CHECK(c.w_inv(0, 0) == doctest::Approx(0.2));
  CHECK(c.b1 == doctest::Approx(12.8));
  CHECK(c.a1 == 5.0);
  CHECK_THROWS_AS(compressed_beta_sigma(Matrix::Constant(1, 1, 4.0), Vector::Constant(1, 6.0), 1.0, 5.0),
                  DegeneracyError);
  // pooled draws: E[sigma2] = b1 / (a1 - 2), E[beta] = mean
  RngStream rng(1);
  const SpdMatrix w(c.w_inv);
  Vector beta(1);
  double s2 = 0.0, sum_b = 0.0, sum_s = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    compressed_draw_beta_sigma(c, w, rng, beta, s2);
    sum_b += beta(0);
    sum_s += s2;
  }
  CHECK(sum_b / n == doctest::Approx(1.2).epsilon(0.01));
  CHECK(sum_s / n == doctest::Approx(12.8 / 3.0).epsilon(0.05));
}

TEST_CASE("projection prior has orthonormal rows") {
  RngStream rng(2);
  const Matrix phi = make_projection_prior(10, 200, rng);
  CHECK((phi * phi.transpose() - Matrix::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(compressed_default_m(500) == 10);
  CHECK(compressed_default_m(100000) == 12);
}

TEST_CASE("compressed surrogates under frozen estimates match brute force") {
  RngStream rng(3);
  const Eigen::Index m = 2, p = 3;
  const Matrix phi0 = make_projection_prior(m, p, rng);
  std::vector<Shard> shards;
  for (int t = 0; t < 4; ++t) {
    Shard s;
    s.t = static_cast<std::size_t>(t + 1);
    s.X = Matrix::Random(6, p);
    s.y = Vector::Random(6);
    shards.push_back(s);
  }
  Matrix phi_hat = phi0;
  phi_hat(0, 1) += 0.3;
  const Vector beta_hat = (Vector(2) << 0.8, -0.4).finished();
  CompressedCdf model(phi0);
  SamplerState state;
  const std::map<ParamId, Vector> frozen{{"Phi", Eigen::Map<const Vector>(phi_hat.data(), m * p)},
                                         {"beta", beta_hat}};
  for (const auto& s : shards) fold_with_frozen_estimates(model, state, s, frozen);
  const Matrix x = stack_x(shards);
  const Vector y = stack_y(shards);
  CHECK((state.matrix("C11") - phi_hat * x.transpose() * x * phi_hat.transpose()).norm() < 1e-10);
  CHECK((state.vector("C12") - phi_hat * x.transpose() * y).norm() < 1e-10);
  const Vector gamma = phi_hat.transpose() * beta_hat;
  for (Eigen::Index j = 0; j < p; ++j) {
    // partial residual with column j's own contribution restored
    Vector z = y;
    for (Eigen::Index l = 0; l < p; ++l)
      if (l != j) z -= x.col(l) * gamma(l);
    const Vector h = beta_hat * x.col(j).dot(z);
    CHECK((state.matrix("C22").col(j) - h).norm() < 1e-10);
    const Matrix c21 = beta_hat * beta_hat.transpose() * x.col(j).squaredNorm();
    CHECK((state.matrix("C21").middleCols(j * m, m) - c21).norm() < 1e-10);
  }
}

TEST_CASE("compressed C-DF factorizes W once per shard and ignores zero shards") {
  RngStream rng(4);
  const Eigen::Index p = 20;
  const Matrix phi0 = make_projection_prior(10, p, rng);
  Vector gamma = Vector::Zero(p);
  gamma.head(3) << 2.0, -1.5, 1.0;
  std::vector<Shard> shards;
  for (int t = 0; t < 3; ++t) {
    Shard s;
    s.t = static_cast<std::size_t>(t + 1);
    s.X.resize(30, p);
    for (Eigen::Index i = 0; i < s.X.size(); ++i) s.X.data()[i] = rng.normal();
    s.y = s.X * gamma;
    for (Eigen::Index i = 0; i < 30; ++i) s.y(i) += 2.0 * rng.normal();
    shards.push_back(s);
  }
  CompressedCdf model(phi0);
  SamplerState state(RngStream(5));
  for (const auto& s : shards) step_shard(state, s, model, EngineConfig{50, 0});
  CHECK(CompressedCdf::w_factorizations(state) == 3);
  CHECK(state.stat("C11").updates() == 3);
  std::map<std::string, Matrix> before;
  for (const auto& [id, st] : state.scss()) before[id] = st.value();
  Shard zero;
  zero.t = 4;
  zero.X = Matrix::Zero(30, p);
  zero.y = Vector::Zero(30);
  step_shard(state, zero, model, EngineConfig{50, 0});
  // the observation count is the only statistic a zero shard moves
  for (const auto& [id, st] : state.scss())
    if (id != "nt") CHECK(st.value() == before[id]);
  CHECK(state.estimate("gamma").size() == p);
}
