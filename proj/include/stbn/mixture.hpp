#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <json.hpp>

namespace stbn {

/// Per-dimension z-score transform estimated from training rows.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  static Standardizer identity(Eigen::Index dim);
  /// Population mean and standard deviation of each column of `rows`.
  static Standardizer fit(const Eigen::MatrixXd& rows);

  Eigen::Index dim() const noexcept { return mean.size(); }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return (x - mean).cwiseQuotient(std); }
  Eigen::VectorXd invert(const Eigen::VectorXd& z) const { return z.cwiseProduct(std) + mean; }
};

struct GaussianComponent {
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Gaussian mixture in standardized coordinates. Immutable; the Cholesky
/// factor of every covariance is computed once at construction.
class GmmModel {
 public:
  /// Throws BadModel if a component is inconsistent, a covariance is not
  /// symmetric positive definite, or the weights do not sum to one.
  GmmModel(std::vector<GaussianComponent> components, Standardizer standardizer);

  Eigen::Index dim() const noexcept { return standardizer_.dim(); }
  std::size_t size() const noexcept { return components_.size(); }
  const std::vector<GaussianComponent>& components() const noexcept { return components_; }
  const Standardizer& standardizer() const noexcept { return standardizer_; }

  /// Lower Cholesky factor of component j's covariance.
  const Eigen::MatrixXd& cholesky(std::size_t j) const noexcept { return chol_[j]; }
  double log_det(std::size_t j) const noexcept { return log_det_[j]; }

 private:
  std::vector<GaussianComponent> components_;
  Standardizer standardizer_;
  std::vector<Eigen::MatrixXd> chol_;
  std::vector<double> log_det_;
};

struct FitConfig {
  int k_min = 1;
  int k_max = 8;
  int restarts = 5;
  double tol = 1e-6;     // relative log-likelihood change
  int max_iter = 500;
  double reg_eps = 1e-6;  // diagonal loading, scaled by trace/D
  std::uint64_t seed = 0;

  void validate() const;
};

/// Outcome of one EM run (one K, one restart).
struct EmRun {
  int k = 0;
  int restart = 0;
  bool valid = false;
  bool converged = false;
  /// Stopped because a regularized M-step lowered the likelihood; the
  /// parameters from before that step are kept.
  bool stalled = false;
  int n_iter = 0;
  double loglik = 0.0;
  std::vector<double> loglik_trace;
};

/// Log-likelihoods here are of the standardized rows.
struct FitReport {
  int chosen_k = 0;
  double final_loglik = 0.0;
  double bic = 0.0;
  std::vector<double> loglik_trace;  // winning run
  int n_iter = 0;
  bool converged = false;
  std::vector<double> bic_by_k;  // index i <-> K = k_min + i; +inf when every restart failed
  std::vector<EmRun> runs;
};

struct FitResult {
  GmmModel model;
  FitReport report;
};

/// Free-parameter count of a K-component full-covariance mixture in D dims.
int gmm_parameter_count(int k, int dim);

/// -2 loglik + n_params ln m
double bic(double loglik, int n_params, long m);

/// EM with k-means++ style seeding, `restarts` runs per K, K chosen by BIC.
/// rows: m x D samples. Deterministic in (rows, cfg).
FitResult fit_gmm(const Eigen::MatrixXd& rows, const FitConfig& cfg);

/// Log density in original units (includes the standardizer Jacobian).
double log_density(const GmmModel& model, const Eigen::VectorXd& x);

/// Log N(z; mean_j, cov_j) for a standardized point.
double component_log_pdf(const GmmModel& model, std::size_t j, const Eigen::VectorXd& z);

nlohmann::json gmm_to_json(const GmmModel& model);
GmmModel gmm_from_json(const nlohmann::json& doc);

}  // namespace stbn
