#include "stbn/evalharness.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "stbn/error.hpp"
#include "stbn/predictor.hpp"

namespace stbn {

double rmse(std::span<const double> predictions, std::span<const double> truth) {
  if (predictions.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, "rmse: " + std::to_string(predictions.size()) + " predictions vs " +
                                               std::to_string(truth.size()) + " observations");
  }
  if (predictions.empty()) throw Error(ErrorCode::Empty, "rmse of an empty sequence");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = predictions[i] - truth[i];
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(truth.size()));
}

std::string method_name(Method m) {
  switch (m) {
    case Method::RandomWalk:
      return "RandomWalk";
    case Method::MarkovChain:
      return "MarkovChain";
    case Method::Stbn:
      return "STBN";
  }
  return "?";
}

std::vector<double> random_walk_test_forecasts(const FlowPanel& panel, std::string_view target,
                                               std::size_t train_len) {
  if (train_len == 0 || train_len >= panel.rows()) {
    throw Error(ErrorCode::BadSplit, "train_len must lie in [1, T-1]");
  }
  const auto series = panel.series(target);
  std::vector<double> out;
  out.reserve(series.size() - train_len);
  for (std::size_t r = train_len; r < series.size(); ++r) out.push_back(random_walk_forecast(series, r));
  return out;
}

namespace {

template <typename Fn>
auto stage(const std::string& target, const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), "target '" + target + "', stage " + name + ": " + e.what());
  }
}

}  // namespace

EvaluationReport run_experiment(const FlowPanel& panel, std::span<const std::string> targets,
                                const ExperimentConfig& cfg) {
  if (targets.empty()) throw Error(ErrorCode::Empty, "no target sites given");
  auto [train, test] = split_chronological(panel, cfg.train_len);
  (void)test;

  EvaluationReport report;
  report.config = cfg;
  report.n_test = panel.rows() - cfg.train_len;
  for (const Method m : kAllMethods) report.methods.push_back(method_name(m));
  report.rmse.assign(std::size(kAllMethods), {});

  for (const auto& target : targets) {
    TargetForecasts f;
    f.target = target;
    f.random_walk = stage(target, "random-walk", [&] { return random_walk_test_forecasts(panel, target, cfg.train_len); });
    const auto mc = stage(target, "markov-chain training",
                          [&] { return train_markov_chain(train, target, cfg.markov_order, cfg.fit); });
    const auto st = stage(target, "stbn training", [&] { return train_stbn(train, target, cfg.lag, cfg.fit); });
    f.cause_nodes = st.cause_nodes();

    const auto col = panel.site_index(target);
    stage(target, "forecasting", [&] {
      for (std::size_t r = cfg.train_len; r < panel.rows(); ++r) {
        const std::int64_t t = panel.origin_index() + static_cast<std::int64_t>(r);
        f.t.push_back(t);
        f.truth.push_back(panel.at(r, col));
        f.markov_chain.push_back(forecast_markov_chain(mc, panel, t));
        f.stbn.push_back(forecast_stbn(st, panel, t));
      }
      return 0;
    });

    report.targets.push_back(target);
    report.rmse[static_cast<std::size_t>(Method::RandomWalk)].push_back(rmse(f.random_walk, f.truth));
    report.rmse[static_cast<std::size_t>(Method::MarkovChain)].push_back(rmse(f.markov_chain, f.truth));
    report.rmse[static_cast<std::size_t>(Method::Stbn)].push_back(rmse(f.stbn, f.truth));
    report.forecasts.push_back(std::move(f));
  }
  return report;
}

namespace {

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

void write_report_csv(const EvaluationReport& report, std::ostream& out) {
  out << "method,target,rmse\n";
  for (std::size_t m = 0; m < report.methods.size(); ++m) {
    for (std::size_t t = 0; t < report.targets.size(); ++t) {
      out << report.methods[m] << ',' << report.targets[t] << ',' << shortest(report.rmse[m][t]) << '\n';
    }
  }
}

void print_report_table(const EvaluationReport& report, std::ostream& out) {
  std::size_t label = 8;
  for (const auto& m : report.methods) label = std::max(label, m.size());
  label += 2;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(label), "Methods");
  out << buf;
  for (const auto& t : report.targets) {
    std::snprintf(buf, sizeof(buf), "%10s", t.c_str());
    out << buf;
  }
  out << '\n';
  for (std::size_t m = 0; m < report.methods.size(); ++m) {
    std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(label), report.methods[m].c_str());
    out << buf;
    for (const double v : report.rmse[m]) {
      std::snprintf(buf, sizeof(buf), "%10.2f", v);
      out << buf;
    }
    out << '\n';
  }
}

void write_forecast_dump(const TargetForecasts& f, std::ostream& out) {
  out << "t,truth,rw,mc,stbn\n";
  for (std::size_t i = 0; i < f.t.size(); ++i) {
    out << f.t[i] << ',' << shortest(f.truth[i]) << ',' << shortest(f.random_walk[i]) << ','
        << shortest(f.markov_chain[i]) << ',' << shortest(f.stbn[i]) << '\n';
  }
}

}  // namespace stbn
