#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stbn/mixture.hpp"
#include "stbn/panel.hpp"
#include "stbn/ranking.hpp"

namespace stbn {

/// sqrt(mean((p - t)^2)). Throws LengthMismatch or Empty.
double rmse(std::span<const double> predictions, std::span<const double> truth);

enum class Method { RandomWalk, MarkovChain, Stbn };
inline constexpr Method kAllMethods[] = {Method::RandomWalk, Method::MarkovChain, Method::Stbn};
std::string method_name(Method m);

struct ExperimentConfig {
  LagConfig lag;
  FitConfig fit;
  int markov_order = 4;
  std::size_t train_len = 2112;
};

/// One-step forecasts of every method for one target over the test rows.
struct TargetForecasts {
  std::string target;
  std::vector<std::int64_t> t;
  std::vector<double> truth;
  std::vector<double> random_walk;
  std::vector<double> markov_chain;
  std::vector<double> stbn;
  CauseNodeSet cause_nodes;
};

struct EvaluationReport {
  std::vector<std::string> targets;
  std::vector<std::string> methods;  // RandomWalk, MarkovChain, STBN
  std::vector<std::vector<double>> rmse;  // [method][target]
  ExperimentConfig config;
  std::size_t n_test = 0;
  std::vector<TargetForecasts> forecasts;

  double at(Method m, std::size_t target) const { return rmse[static_cast<std::size_t>(m)][target]; }
};

/// Random Walk forecasts of the target over rows [train_len, T), each
/// conditioned on the observed previous value.
std::vector<double> random_walk_test_forecasts(const FlowPanel& panel, std::string_view target,
                                               std::size_t train_len);

/// Chronological split, training of both mixture predictors per target on the
/// training rows, and one-step forecasts over every test row from observed
/// history. Any per-target failure is rethrown naming target and stage.
EvaluationReport run_experiment(const FlowPanel& panel, std::span<const std::string> targets,
                                const ExperimentConfig& cfg);

/// `method,target,rmse`
void write_report_csv(const EvaluationReport& report, std::ostream& out);
/// Methods as rows, targets as columns.
void print_report_table(const EvaluationReport& report, std::ostream& out);
/// `t,truth,rw,mc,stbn`
void write_forecast_dump(const TargetForecasts& f, std::ostream& out);

}  // namespace stbn
