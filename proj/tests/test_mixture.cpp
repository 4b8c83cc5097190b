#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "stbn/error.hpp"
#include "stbn/mixture.hpp"

using namespace stbn;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an stbn::Error");
  return ErrorCode::Empty;
}

GmmModel standard_normal_1d() {
  return GmmModel({{1.0, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1)}}, Standardizer::identity(1));
}

double direct_normal_2d(double x, double y, const Eigen::Vector2d& mu, const Eigen::Matrix2d& cov) {
  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
  const double dx = x - mu(0), dy = y - mu(1);
  const double q = (cov(1, 1) * dx * dx - 2.0 * cov(0, 1) * dx * dy + cov(0, 0) * dy * dy) / det;
  return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(det));
}

}  // namespace

TEST_CASE("bic arithmetic") {
  CHECK(bic(0.0, 1, 1) == 0.0);
  // m = e^2 is not an integer, so evaluate the formula with ln m = 2 directly
  CHECK(-2.0 * -100.0 + 10 * 2.0 == 220.0);
  CHECK(bic(-100.0, 10, 1) == doctest::Approx(200.0));
  CHECK(bic(-100.0, 10, 100) == doctest::Approx(200.0 + 10.0 * std::log(100.0)));
  for (int p = 1; p < 20; ++p) CHECK(bic(-50.0, p + 1, 30) > bic(-50.0, p, 30));
}

TEST_CASE("parameter count") {
  CHECK(gmm_parameter_count(1, 1) == 2);
  CHECK(gmm_parameter_count(2, 1) == 5);
  CHECK(gmm_parameter_count(3, 5) == 2 + 15 + 45);
}

TEST_CASE("log_density of simple models") {
  const auto m = standard_normal_1d();
  CHECK(log_density(m, Eigen::VectorXd::Zero(1)) == doctest::Approx(-0.918938533204673).epsilon(1e-14));

  Eigen::VectorXd mu(2);
  mu << 0.3, -1.2;
  Eigen::MatrixXd cov(2, 2);
  cov << 1.5, 0.4, 0.4, 0.8;
  const GmmModel single({{1.0, mu, cov}}, Standardizer::identity(2));
  const GmmModel doubled({{0.5, mu, cov}, {0.5, mu, cov}}, Standardizer::identity(2));
  for (double x : {-2.0, 0.0, 1.7}) {
    Eigen::VectorXd p(2);
    p << x, 0.5 * x;
    CHECK(log_density(doubled, p) == doctest::Approx(log_density(single, p)).epsilon(1e-14));
    const double direct = std::log(direct_normal_2d(p(0), p(1), mu, cov));
    CHECK(log_density(single, p) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("log_density integrates to one") {
  // Random two-component model with a non-trivial standardizer; Monte-Carlo
  // integration over a box covering essentially all the mass.
  std::mt19937_64 rng(77);
  Standardizer s{Eigen::Vector2d(100.0, 50.0), Eigen::Vector2d(20.0, 5.0)};
  Eigen::MatrixXd c1(2, 2), c2(2, 2);
  c1 << 1.0, 0.3, 0.3, 0.5;
  c2 << 0.4, -0.1, -0.1, 0.9;
  const GmmModel m({{0.35, Eigen::Vector2d(-1.0, 0.5), c1}, {0.65, Eigen::Vector2d(1.2, -0.4), c2}}, s);

  const double lo_x = 100.0 - 20.0 * 8, hi_x = 100.0 + 20.0 * 8;
  const double lo_y = 50.0 - 5.0 * 8, hi_y = 50.0 + 5.0 * 8;
  std::uniform_real_distribution<double> ux(lo_x, hi_x), uy(lo_y, hi_y);
  const int n = 400000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::exp(log_density(m, Eigen::Vector2d(ux(rng), uy(rng))));
  const double integral = acc / n * (hi_x - lo_x) * (hi_y - lo_y);
  CHECK(integral == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("log_density input checks") {
  const auto m = standard_normal_1d();
  CHECK(code_of([&] { log_density(m, Eigen::VectorXd::Zero(2)); }) == ErrorCode::DimensionMismatch);
  Eigen::VectorXd bad(1);
  bad << std::numeric_limits<double>::quiet_NaN();
  CHECK(code_of([&] { log_density(m, bad); }) == ErrorCode::NonFiniteInput);
}

TEST_CASE("model construction rejects inconsistent parameters") {
  const auto I = Eigen::MatrixXd::Identity(2, 2);
  const auto z = Eigen::VectorXd::Zero(2);
  CHECK(code_of([&] { GmmModel({{0.7, z, I}}, Standardizer::identity(2)); }) == ErrorCode::BadModel);
  CHECK(code_of([&] { GmmModel({{1.0, z, -I}}, Standardizer::identity(2)); }) == ErrorCode::BadModel);
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.1, 1.0;
  CHECK(code_of([&] { GmmModel({{1.0, z, asym}}, Standardizer::identity(2)); }) == ErrorCode::BadModel);
  CHECK(code_of([&] { GmmModel({}, Standardizer::identity(2)); }) == ErrorCode::BadModel);
  CHECK(code_of([&] { GmmModel({{1.0, Eigen::VectorXd::Zero(3), I}}, Standardizer::identity(2)); }) ==
        ErrorCode::BadModel);
  Standardizer zero_std{z, Eigen::Vector2d(1.0, 0.0)};
  CHECK(code_of([&] { GmmModel({{1.0, z, I}}, zero_std); }) == ErrorCode::BadModel);
}

TEST_CASE("fit a single normal") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd rows(500, 1);
  for (Eigen::Index i = 0; i < 500; ++i) rows(i, 0) = g(rng);
  const double sample_mean = rows.mean();
  const double sample_var = (rows.array() - sample_mean).square().mean();

  FitConfig cfg;
  cfg.k_min = 1;
  cfg.k_max = 3;
  const auto fit = fit_gmm(rows, cfg);
  CHECK(fit.report.chosen_k == 1);
  REQUIRE(fit.model.size() == 1);
  const auto& s = fit.model.standardizer();
  const auto& c = fit.model.components()[0];
  const double mean = c.mean(0) * s.std(0) + s.mean(0);
  const double var = c.covariance(0, 0) * s.std(0) * s.std(0);
  CHECK(std::abs(mean - sample_mean) < 3.0 / std::sqrt(500.0));
  CHECK(std::abs(var - sample_var) < 0.2 * sample_var);
}

TEST_CASE("fit two separated clusters") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd rows(1000, 1);
  for (Eigen::Index i = 0; i < 1000; ++i) rows(i, 0) = (i < 500 ? -10.0 : 10.0) + g(rng);
  FitConfig cfg;
  cfg.k_min = 1;
  cfg.k_max = 4;
  const auto fit = fit_gmm(rows, cfg);
  CHECK(fit.report.chosen_k == 2);
  REQUIRE(fit.model.size() == 2);
  const auto& s = fit.model.standardizer();
  std::vector<double> means;
  double total = 0.0;
  for (const auto& c : fit.model.components()) {
    means.push_back(c.mean(0) * s.std(0) + s.mean(0));
    total += c.weight;
  }
  std::sort(means.begin(), means.end());
  CHECK(std::abs(means[0] + 10.0) < 0.5);
  CHECK(std::abs(means[1] - 10.0) < 0.5);
  CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("fit preconditions") {
  FitConfig cfg;
  CHECK(code_of([&] { fit_gmm(Eigen::MatrixXd::Random(15, 2), cfg); }) == ErrorCode::TooFewSamples);
  Eigen::MatrixXd flat = Eigen::MatrixXd::Random(100, 2);
  flat.col(1).setConstant(3.0);
  CHECK(code_of([&] { fit_gmm(flat, cfg); }) == ErrorCode::ZeroVarianceColumn);
  Eigen::MatrixXd nan = Eigen::MatrixXd::Random(100, 2);
  nan(5, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(code_of([&] { fit_gmm(nan, cfg); }) == ErrorCode::NonFiniteInput);
  FitConfig bad = cfg;
  bad.k_min = 3;
  bad.k_max = 2;
  CHECK(code_of([&] { fit_gmm(Eigen::MatrixXd::Random(100, 2), bad); }) == ErrorCode::InvalidConfig);
  bad = cfg;
  bad.tol = 0.0;
  CHECK(code_of([&] { fit_gmm(Eigen::MatrixXd::Random(100, 2), bad); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("EM traces are monotone and covariances factorize") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 8; ++trial) {
    const Eigen::Index D = 1 + trial % 3;
    Eigen::MatrixXd rows(300, D);
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      const double centre = (i % 3) * 4.0;
      for (Eigen::Index d = 0; d < D; ++d) rows(i, d) = centre + g(rng) * (1.0 + d);
    }
    FitConfig cfg;
    cfg.k_max = 4;
    cfg.restarts = 2;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const auto fit = fit_gmm(rows, cfg);
    for (const auto& run : fit.report.runs) {
      for (std::size_t i = 1; i < run.loglik_trace.size(); ++i) {
        REQUIRE(run.loglik_trace[i] >= run.loglik_trace[i - 1] - 1e-9);
      }
      if (run.valid) CHECK(run.loglik == run.loglik_trace.back());
      CHECK_FALSE((run.converged && run.stalled));
    }
    double wsum = 0.0;
    for (const auto& c : fit.model.components()) {
      CHECK(c.weight > 0.0);
      wsum += c.weight;
      Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
      CHECK(llt.info() == Eigen::Success);
      CHECK((c.covariance - c.covariance.transpose()).norm() == 0.0);
    }
    CHECK(std::abs(wsum - 1.0) < 1e-12);
    CHECK(fit.report.bic_by_k.size() == 4);
    CHECK(fit.report.bic == *std::min_element(fit.report.bic_by_k.begin(), fit.report.bic_by_k.end()));
    CHECK(fit.report.loglik_trace.back() == fit.report.final_loglik);
  }
}

TEST_CASE("fit is deterministic") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd rows(200, 3);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index d = 0; d < 3; ++d) rows(i, d) = g(rng) + (i % 2) * 3.0 * d;
  }
  FitConfig cfg;
  cfg.k_max = 3;
  cfg.seed = 12;
  const auto a = fit_gmm(rows, cfg);
  const auto b = fit_gmm(rows, cfg);
  CHECK(gmm_to_json(a.model).dump() == gmm_to_json(b.model).dump());
  CHECK(a.report.loglik_trace == b.report.loglik_trace);
  CHECK(a.report.chosen_k == b.report.chosen_k);
}

TEST_CASE("standardizer round trip") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1000.0, 1000.0);
  Eigen::MatrixXd rows(50, 4);
  for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = u(rng);
  const auto s = Standardizer::fit(rows);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd x(4);
    for (Eigen::Index d = 0; d < 4; ++d) x(d) = u(rng);
    const Eigen::VectorXd back = s.invert(s.apply(x));
    for (Eigen::Index d = 0; d < 4; ++d) CHECK(std::abs(back(d) - x(d)) <= 1e-12 * std::max(1.0, std::abs(x(d))));
  }
}

TEST_CASE("JSON round trip preserves log_density exactly") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd rows(300, 3);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index d = 0; d < 3; ++d) rows(i, d) = 100.0 + 30.0 * g(rng) + (i % 2) * 50.0;
  }
  FitConfig cfg;
  cfg.k_max = 3;
  const auto fit = fit_gmm(rows, cfg);
  const auto text = gmm_to_json(fit.model).dump();
  const auto loaded = gmm_from_json(nlohmann::json::parse(text));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const Eigen::VectorXd x = rows.row(i).transpose();
    REQUIRE(log_density(loaded, x) == log_density(fit.model, x));
  }
  CHECK(code_of([] { gmm_from_json(nlohmann::json::parse(R"({"dim": 2})")); }) == ErrorCode::BadModel);
}
