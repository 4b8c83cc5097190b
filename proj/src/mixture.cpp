#include "stbn/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "stbn/error.hpp"

namespace stbn {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// Responsibility mass below which a component is considered dead.
constexpr double kMinComponentMass = 1e-8;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

Standardizer Standardizer::identity(Eigen::Index dim) {
  return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& rows) {
  const auto m = static_cast<double>(rows.rows());
  Standardizer s;
  s.mean = rows.colwise().sum().transpose() / m;
  s.std.resize(rows.cols());
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    const double var = (rows.col(c).array() - s.mean(c)).square().sum() / m;
    s.std(c) = std::sqrt(var);
  }
  return s;
}

GmmModel::GmmModel(std::vector<GaussianComponent> components, Standardizer standardizer)
    : components_(std::move(components)), standardizer_(std::move(standardizer)) {
  const auto D = standardizer_.dim();
  if (D < 1) throw Error(ErrorCode::BadModel, "model dimension must be >= 1");
  if (standardizer_.std.size() != D) throw Error(ErrorCode::BadModel, "standardizer size mismatch");
  for (Eigen::Index d = 0; d < D; ++d) {
    if (!(standardizer_.std(d) > 0.0) || !std::isfinite(standardizer_.std(d)) ||
        !std::isfinite(standardizer_.mean(d))) {
      throw Error(ErrorCode::BadModel, "standardizer std must be positive and finite");
    }
  }
  if (components_.empty()) throw Error(ErrorCode::BadModel, "mixture has no components");
  double total = 0.0;
  for (std::size_t j = 0; j < components_.size(); ++j) {
    const auto& c = components_[j];
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) throw Error(ErrorCode::BadModel, "weight must be > 0");
    if (c.mean.size() != D || c.covariance.rows() != D || c.covariance.cols() != D) {
      throw Error(ErrorCode::BadModel, "component " + std::to_string(j) + " has the wrong dimension");
    }
    if (!c.mean.allFinite() || !c.covariance.allFinite()) {
      throw Error(ErrorCode::BadModel, "component " + std::to_string(j) + " is not finite");
    }
    const double scale = c.covariance.cwiseAbs().maxCoeff();
    if ((c.covariance - c.covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw Error(ErrorCode::BadModel, "component " + std::to_string(j) + " covariance is not symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::BadModel, "component " + std::to_string(j) + " covariance is not positive definite");
    }
    Eigen::MatrixXd L = llt.matrixL();
    log_det_.push_back(2.0 * L.diagonal().array().log().sum());
    chol_.push_back(std::move(L));
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-10) throw Error(ErrorCode::BadModel, "weights do not sum to one");
}

void FitConfig::validate() const {
  if (k_min < 1 || k_max < k_min) throw Error(ErrorCode::InvalidConfig, "k_range must satisfy 1 <= k_min <= k_max");
  if (restarts < 1) throw Error(ErrorCode::InvalidConfig, "restarts must be >= 1");
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "tol must be > 0");
  if (max_iter < 1) throw Error(ErrorCode::InvalidConfig, "max_iter must be >= 1");
  if (!(reg_eps > 0.0)) throw Error(ErrorCode::InvalidConfig, "reg_eps must be > 0");
}

int gmm_parameter_count(int k, int dim) { return k - 1 + k * dim + k * dim * (dim + 1) / 2; }

double bic(double loglik, int n_params, long m) {
  return -2.0 * loglik + static_cast<double>(n_params) * std::log(static_cast<double>(m));
}

namespace {

struct RunState {
  EmRun summary;
  std::vector<GaussianComponent> components;
};

// Means by D^2-weighted seeding over the columns of z (D x m).
std::vector<Eigen::VectorXd> seed_means(const Eigen::MatrixXd& z, int k, std::mt19937_64& rng) {
  const Eigen::Index m = z.cols();
  std::vector<Eigen::VectorXd> means;
  means.push_back(z.col(static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(m))));
  Eigen::VectorXd dist2 = (z.colwise() - means.back()).colwise().squaredNorm().transpose();
  while (static_cast<int>(means.size()) < k) {
    const double total = dist2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      pick = m - 1;
      for (Eigen::Index i = 0; i < m; ++i) {
        acc += dist2(i);
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(m));
    }
    means.push_back(z.col(pick));
    dist2 = dist2.cwiseMin((z.colwise() - means.back()).colwise().squaredNorm().transpose());
  }
  return means;
}

void regularize(Eigen::MatrixXd& cov, double reg_eps) {
  const auto D = static_cast<double>(cov.rows());
  cov = 0.5 * (cov + cov.transpose());
  cov.diagonal().array() += reg_eps * cov.trace() / D;
}

// EM working state. Points are the columns of the D x m matrix z, so point i
// occupies z.data()[i*D .. i*D+D). Responsibilities are stored m x K, row-major.
class EmWorkspace {
 public:
  EmWorkspace(const Eigen::MatrixXd& z, int k)
      : z_(z), D_(static_cast<std::size_t>(z.rows())), m_(static_cast<std::size_t>(z.cols())),
        k_(static_cast<std::size_t>(k)), resp_(m_ * k_), chol_(k_ * D_ * D_), offset_(k_), diff_(D_) {}

  // Responsibilities for the current components; returns the log-likelihood
  // (-inf when a covariance cannot be factorized).
  double e_step(const std::vector<GaussianComponent>& comps) {
    for (std::size_t j = 0; j < k_; ++j) {
      const auto& c = comps[j];
      Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
      if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
      const Eigen::MatrixXd L = llt.matrixL();
      double log_det = 0.0;
      for (std::size_t a = 0; a < D_; ++a) {
        log_det += std::log(L(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)));
        for (std::size_t b = 0; b < a; ++b) {
          chol_[(j * D_ + a) * D_ + b] = L(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        }
        // diagonal slot holds the reciprocal
        chol_[(j * D_ + a) * D_ + a] = 1.0 / L(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a));
      }
      offset_[j] = std::log(c.weight) - 0.5 * (static_cast<double>(D_) * kLog2Pi + 2.0 * log_det);
    }

    const double* data = z_.data();
    double loglik = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const double* x = data + i * D_;
      double* r = resp_.data() + i * k_;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k_; ++j) {
        const double* mu = comps[j].mean.data();
        const double* L = chol_.data() + j * D_ * D_;
        double maha = 0.0;
        for (std::size_t a = 0; a < D_; ++a) {
          double v = x[a] - mu[a];
          for (std::size_t b = 0; b < a; ++b) v -= L[a * D_ + b] * diff_[b];
          v *= L[a * D_ + a];
          diff_[a] = v;
          maha += v * v;
        }
        r[j] = offset_[j] - 0.5 * maha;
        mx = std::max(mx, r[j]);
      }
      double acc = 0.0;
      for (std::size_t j = 0; j < k_; ++j) {
        r[j] = std::exp(r[j] - mx);
        acc += r[j];
      }
      for (std::size_t j = 0; j < k_; ++j) r[j] /= acc;
      loglik += mx + std::log(acc);
    }
    return loglik;
  }

  // Weighted means and covariances from the stored responsibilities.
  // Returns false when a component has lost all its mass.
  bool m_step(double reg_eps, std::vector<GaussianComponent>& comps) const {
    const double* data = z_.data();
    const auto D = static_cast<Eigen::Index>(D_);
    double total = 0.0;
    for (std::size_t j = 0; j < k_; ++j) {
      double mass = 0.0;
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(D);
      for (std::size_t i = 0; i < m_; ++i) {
        const double r = resp_[i * k_ + j];
        mass += r;
        const double* x = data + i * D_;
        for (std::size_t a = 0; a < D_; ++a) mean[static_cast<Eigen::Index>(a)] += r * x[a];
      }
      if (!(mass > kMinComponentMass * static_cast<double>(m_))) return false;
      mean /= mass;

      std::vector<double> acc(D_ * D_, 0.0);
      std::vector<double> d(D_);
      for (std::size_t i = 0; i < m_; ++i) {
        const double r = resp_[i * k_ + j];
        const double* x = data + i * D_;
        for (std::size_t a = 0; a < D_; ++a) d[a] = x[a] - mean[static_cast<Eigen::Index>(a)];
        for (std::size_t a = 0; a < D_; ++a) {
          const double ra = r * d[a];
          double* row = acc.data() + a * D_;
          for (std::size_t b = 0; b <= a; ++b) row[b] += ra * d[b];
        }
      }
      Eigen::MatrixXd cov(D, D);
      for (Eigen::Index a = 0; a < D; ++a) {
        for (Eigen::Index b = 0; b <= a; ++b) {
          cov(a, b) = cov(b, a) = acc[static_cast<std::size_t>(a * D + b)];
        }
      }
      cov /= mass;
      regularize(cov, reg_eps);

      auto& c = comps[j];
      c.mean = std::move(mean);
      c.covariance = std::move(cov);
      c.weight = mass / static_cast<double>(m_);
      total += c.weight;
    }
    for (auto& c : comps) c.weight /= total;
    return true;
  }

 private:
  const Eigen::MatrixXd& z_;
  std::size_t D_, m_, k_;
  std::vector<double> resp_;
  std::vector<double> chol_;  // K row-major D x D lower factors, reciprocal diagonal
  std::vector<double> offset_;
  std::vector<double> diff_;
};

RunState run_em(const Eigen::MatrixXd& z, const Eigen::MatrixXd& global_cov, int k, int restart,
                const FitConfig& cfg) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(restart)};
  std::mt19937_64 rng(seq);

  RunState state;
  state.summary.k = k;
  state.summary.restart = restart;
  for (auto& mean : seed_means(z, k, rng)) {
    state.components.push_back({1.0 / k, std::move(mean), global_cov});
  }

  EmWorkspace ws(z, k);
  double previous = 0.0;
  std::vector<GaussianComponent> before;
  for (int iter = 0;; ++iter) {
    const double loglik = ws.e_step(state.components);
    if (!std::isfinite(loglik)) return state;
    // Diagonal loading can undo the EM ascent near a collapsing component.
    if (iter > 0 && loglik < previous) {
      state.components = std::move(before);
      if (previous - loglik <= cfg.tol * std::abs(previous)) {
        state.summary.converged = true;
      } else {
        state.summary.stalled = true;
      }
      break;
    }
    state.summary.loglik_trace.push_back(loglik);
    state.summary.loglik = loglik;
    state.summary.n_iter = iter;
    if (iter > 0 && std::abs(loglik - previous) <= cfg.tol * std::abs(previous)) {
      state.summary.converged = true;
      break;
    }
    if (iter == cfg.max_iter) break;
    previous = loglik;
    before = state.components;
    if (!ws.m_step(cfg.reg_eps, state.components)) return state;
  }
  state.summary.valid = true;
  return state;
}

}  // namespace

FitResult fit_gmm(const Eigen::MatrixXd& rows, const FitConfig& cfg) {
  cfg.validate();
  const Eigen::Index m = rows.rows();
  const Eigen::Index D = rows.cols();
  if (D < 1) throw Error(ErrorCode::DimensionMismatch, "rows have zero columns");
  if (m < 2 * static_cast<Eigen::Index>(cfg.k_max)) {
    throw Error(ErrorCode::TooFewSamples, std::to_string(m) + " rows, need at least 2*k_max = " +
                                              std::to_string(2 * cfg.k_max));
  }
  if (!rows.allFinite()) throw Error(ErrorCode::NonFiniteInput, "training rows contain non-finite values");
  for (Eigen::Index c = 0; c < D; ++c) {
    if ((rows.col(c).array() == rows(0, c)).all()) {
      throw Error(ErrorCode::ZeroVarianceColumn, "column " + std::to_string(c) + " is constant");
    }
  }

  Standardizer standardizer = Standardizer::fit(rows);
  for (Eigen::Index c = 0; c < D; ++c) {
    if (!(standardizer.std(c) > 0.0)) {
      throw Error(ErrorCode::ZeroVarianceColumn, "column " + std::to_string(c) + " has zero variance");
    }
  }
  // D x m, one standardized sample per column.
  const Eigen::MatrixXd z =
      ((rows.rowwise() - standardizer.mean.transpose()).array().rowwise() / standardizer.std.transpose().array())
          .matrix()
          .transpose();
  Eigen::MatrixXd global_cov = z * z.transpose() / static_cast<double>(m);
  regularize(global_cov, cfg.reg_eps);

  FitReport report;
  std::vector<GaussianComponent> best_overall;
  double best_bic = std::numeric_limits<double>::infinity();
  for (int k = cfg.k_min; k <= cfg.k_max; ++k) {
    std::vector<GaussianComponent> best_for_k;
    double best_ll = -std::numeric_limits<double>::infinity();
    std::size_t best_run = 0;
    for (int r = 0; r < cfg.restarts; ++r) {
      RunState run = run_em(z, global_cov, k, r, cfg);
      if (run.summary.valid && run.summary.loglik > best_ll) {
        best_ll = run.summary.loglik;
        best_for_k = std::move(run.components);
        best_run = report.runs.size();
      }
      report.runs.push_back(std::move(run.summary));
    }
    if (best_for_k.empty()) {
      report.bic_by_k.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    const double score = bic(best_ll, gmm_parameter_count(k, static_cast<int>(D)), static_cast<long>(m));
    report.bic_by_k.push_back(score);
    if (score < best_bic) {
      best_bic = score;
      best_overall = std::move(best_for_k);
      const auto& win = report.runs[best_run];
      report.chosen_k = k;
      report.final_loglik = win.loglik;
      report.bic = score;
      report.loglik_trace = win.loglik_trace;
      report.n_iter = win.n_iter;
      report.converged = win.converged;
    }
  }
  if (best_overall.empty()) throw Error(ErrorCode::DegenerateFit, "every EM run produced a non-finite likelihood");
  return {GmmModel(std::move(best_overall), std::move(standardizer)), std::move(report)};
}

double component_log_pdf(const GmmModel& model, std::size_t j, const Eigen::VectorXd& z) {
  const auto& c = model.components()[j];
  const Eigen::VectorXd u = model.cholesky(j).triangularView<Eigen::Lower>().solve(z - c.mean);
  return -0.5 * (static_cast<double>(z.size()) * kLog2Pi + model.log_det(j) + u.squaredNorm());
}

double log_density(const GmmModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(model.dim()) + " values, got " + std::to_string(x.size()));
  }
  if (!x.allFinite()) throw Error(ErrorCode::NonFiniteInput, "log_density input is not finite");
  const Eigen::VectorXd z = model.standardizer().apply(x);
  std::vector<double> terms(model.size());
  for (std::size_t j = 0; j < model.size(); ++j) {
    terms[j] = std::log(model.components()[j].weight) + component_log_pdf(model, j, z);
  }
  const double mx = *std::max_element(terms.begin(), terms.end());
  double acc = 0.0;
  for (const double t : terms) acc += std::exp(t - mx);
  return mx + std::log(acc) - model.standardizer().std.array().log().sum();
}

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd vec_from(const nlohmann::json& j, Eigen::Index expected, const char* what) {
  const auto values = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(values.size()) != expected) {
    throw Error(ErrorCode::BadModel, std::string(what) + " has the wrong length");
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), expected);
}

}  // namespace

nlohmann::json gmm_to_json(const GmmModel& model) {
  nlohmann::json doc;
  doc["dim"] = model.dim();
  doc["standardizer"] = {{"mean", to_vec(model.standardizer().mean)}, {"std", to_vec(model.standardizer().std)}};
  auto comps = nlohmann::json::array();
  for (const auto& c : model.components()) {
    auto cov = nlohmann::json::array();
    for (Eigen::Index r = 0; r < c.covariance.rows(); ++r) cov.push_back(to_vec(c.covariance.row(r).transpose()));
    comps.push_back({{"weight", c.weight}, {"mean", to_vec(c.mean)}, {"covariance", std::move(cov)}});
  }
  doc["components"] = std::move(comps);
  return doc;
}

GmmModel gmm_from_json(const nlohmann::json& doc) {
  try {
    const auto D = doc.at("dim").get<Eigen::Index>();
    if (D < 1) throw Error(ErrorCode::BadModel, "dim must be >= 1");
    Standardizer s{vec_from(doc.at("standardizer").at("mean"), D, "standardizer.mean"),
                   vec_from(doc.at("standardizer").at("std"), D, "standardizer.std")};
    std::vector<GaussianComponent> comps;
    for (const auto& jc : doc.at("components")) {
      GaussianComponent c;
      c.weight = jc.at("weight").get<double>();
      c.mean = vec_from(jc.at("mean"), D, "component mean");
      const auto& cov = jc.at("covariance");
      if (static_cast<Eigen::Index>(cov.size()) != D) throw Error(ErrorCode::BadModel, "covariance row count");
      c.covariance.resize(D, D);
      for (Eigen::Index r = 0; r < D; ++r) c.covariance.row(r) = vec_from(cov.at(r), D, "covariance row").transpose();
      comps.push_back(std::move(c));
    }
    return GmmModel(std::move(comps), std::move(s));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadModel, e.what());
  }
}

}  // namespace stbn
