#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "stbn/mixture.hpp"
#include "stbn/panel.hpp"
#include "stbn/ranking.hpp"

namespace stbn {

/// Conditional-mean rule E[y | x] for a joint mixture whose last coordinate
/// is y. Block factorizations are computed once so repeated predictions do
/// no matrix decompositions.
class MixtureRegressor {
 public:
  /// Throws DimensionMismatch when dim < 2, SingularBlock when an input block
  /// cannot be factorized.
  explicit MixtureRegressor(const GmmModel& model);

  Eigen::Index input_dim() const noexcept { return input_dim_; }

  /// Posterior component weights w_j(x) for a raw (unstandardized) input.
  std::vector<double> responsibilities(const Eigen::VectorXd& x) const;
  /// E[y | x] in original units.
  double predict(const Eigen::VectorXd& x) const;

 private:
  struct Block {
    double log_weight;
    Eigen::VectorXd mean_x;
    double mean_y;
    Eigen::MatrixXd chol_xx;
    double log_det_xx;
    Eigen::VectorXd beta;  // cov_xx^{-1} cov_xy
  };

  Eigen::VectorXd standardize_input(const Eigen::VectorXd& x) const;
  std::vector<double> log_terms(const Eigen::VectorXd& zx) const;

  Eigen::Index input_dim_;
  Eigen::VectorXd in_mean_;
  Eigen::VectorXd in_std_;
  double out_mean_;
  double out_std_;
  std::vector<Block> blocks_;
};

/// MMSE forecast: E[Y | X = x] under the fitted joint mixture.
double conditional_mean(const GmmModel& model, const Eigen::VectorXd& x);

/// Spatio-temporal predictor: selected lagged cause nodes plus a joint
/// mixture over (causes, effect), effect last.
class StbnPredictor {
 public:
  StbnPredictor(CauseNodeSet cause_nodes, GmmModel model);

  const std::string& target_site() const noexcept { return cause_nodes_.target_site; }
  const CauseNodeSet& cause_nodes() const noexcept { return cause_nodes_; }
  const GmmModel& model() const noexcept { return model_; }
  const MixtureRegressor& regressor() const noexcept { return regressor_; }
  std::span<const LaggedVariable> inputs() const noexcept { return cause_nodes_.variables; }

 private:
  CauseNodeSet cause_nodes_;
  GmmModel model_;
  MixtureRegressor regressor_;
};

/// Temporal-only baseline: the target's own lags 1..order.
class MarkovChainPredictor {
 public:
  MarkovChainPredictor(std::string target_site, int order, GmmModel model);

  const std::string& target_site() const noexcept { return target_site_; }
  int order() const noexcept { return order_; }
  const GmmModel& model() const noexcept { return model_; }
  const MixtureRegressor& regressor() const noexcept { return regressor_; }
  std::span<const LaggedVariable> inputs() const noexcept { return inputs_; }

 private:
  std::string target_site_;
  int order_;
  GmmModel model_;
  std::vector<LaggedVariable> inputs_;
  MixtureRegressor regressor_;
};

using AnyPredictor = std::variant<StbnPredictor, MarkovChainPredictor>;

/// Ranks, selects k cause nodes, and fits the joint mixture on `train`.
StbnPredictor train_stbn(const FlowPanel& train, std::string_view target, const LagConfig& lag_cfg,
                         const FitConfig& fit_cfg, FitReport* report = nullptr);

MarkovChainPredictor train_markov_chain(const FlowPanel& train, std::string_view target, int order,
                                        const FitConfig& fit_cfg, FitReport* report = nullptr);

/// One-step forecast for absolute step index t, using observed panel values
/// at t - lag for every input. Clamped below at zero.
/// Throws InsufficientHistory when a lagged input falls outside the panel.
double forecast_stbn(const StbnPredictor& p, const FlowPanel& panel, std::int64_t t);
double forecast_markov_chain(const MarkovChainPredictor& p, const FlowPanel& panel, std::int64_t t);
double forecast(const AnyPredictor& p, const FlowPanel& panel, std::int64_t t);

/// x(t+1) = x(t): returns series[t-1]. Throws OutOfRange unless 1 <= t <= |series|.
double random_walk_forecast(std::span<const double> series, std::size_t t);

nlohmann::json predictor_to_json(const AnyPredictor& p);
AnyPredictor predictor_from_json(const nlohmann::json& doc);
void save_predictor(const AnyPredictor& p, const std::filesystem::path& path);
AnyPredictor load_predictor(const std::filesystem::path& path);

}  // namespace stbn
