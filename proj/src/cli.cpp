#include "stbn/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <CLI11.hpp>

#include "stbn/error.hpp"
#include "stbn/evalharness.hpp"
#include "stbn/panel.hpp"
#include "stbn/predictor.hpp"
#include "stbn/ranking.hpp"

namespace stbn {

namespace {

void add_fit_flags(CLI::App& cmd, FitConfig& fit) {
  cmd.add_option("--k-min", fit.k_min, "smallest mixture size tried")->check(CLI::PositiveNumber);
  cmd.add_option("--k-max", fit.k_max, "largest mixture size tried")->check(CLI::PositiveNumber);
  cmd.add_option("--restarts", fit.restarts, "EM runs per mixture size")->check(CLI::PositiveNumber);
  cmd.add_option("--tol", fit.tol, "relative log-likelihood convergence threshold")->check(CLI::PositiveNumber);
  cmd.add_option("--max-iter", fit.max_iter, "EM iteration cap")->check(CLI::PositiveNumber);
  cmd.add_option("--reg-eps", fit.reg_eps, "covariance diagonal loading")->check(CLI::PositiveNumber);
  cmd.add_option("--seed", fit.seed, "EM seeding");
}

void add_lag_flags(CLI::App& cmd, LagConfig& lag) {
  cmd.add_option("--d", lag.d, "maximum lag searched")->check(CLI::PositiveNumber);
  cmd.add_option("--k", lag.k, "number of cause nodes")->check(CLI::PositiveNumber);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  return out;
}

FlowPanel training_part(const FlowPanel& panel, std::size_t train_len) {
  if (train_len == 0) return panel;
  return split_chronological(panel, train_len).first;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatio-temporal Bayesian network traffic flow forecaster", "stbn"};
  app.require_subcommand(1);

  int interval = 15;
  app.add_option("--interval", interval, "minutes per step when loading panels")->check(CLI::PositiveNumber);

  // synth
  SyntheticSpec spec;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic hidden-source panel CSV");
  synth->add_option("--sites", spec.n_sites)->check(CLI::PositiveNumber);
  synth->add_option("--sources", spec.n_sources)->check(CLI::PositiveNumber);
  synth->add_option("--length", spec.length)->check(CLI::PositiveNumber);
  synth->add_option("--steps-per-day", spec.steps_per_day)->check(CLI::PositiveNumber);
  synth->add_option("--delay-min", spec.delay_min)->check(CLI::NonNegativeNumber);
  synth->add_option("--delay-max", spec.delay_max)->check(CLI::NonNegativeNumber);
  synth->add_option("--gain-min", spec.gain_min)->check(CLI::PositiveNumber);
  synth->add_option("--gain-max", spec.gain_max)->check(CLI::PositiveNumber);
  synth->add_option("--noise-std", spec.noise_std)->check(CLI::NonNegativeNumber);
  synth->add_option("--base-level", spec.base_level)->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", synth_seed);
  synth->add_option("-o,--output", synth_out, "output CSV")->required();

  // rank
  std::string rank_panel, rank_target, rank_out;
  LagConfig rank_lag;
  std::size_t rank_train_len = 0;
  auto* rank = app.add_subcommand("rank", "rank lagged variables by |Pearson R| against a target");
  rank->add_option("-i,--panel", rank_panel)->required();
  rank->add_option("--target", rank_target)->required();
  add_lag_flags(*rank, rank_lag);
  rank->add_option("--train-len", rank_train_len, "rank on the first N rows only (0 = all)");
  rank->add_option("-o,--output", rank_out, "ranking CSV")->required();

  // train
  std::string train_panel, train_target, train_out, markov_out;
  LagConfig train_lag;
  FitConfig train_fit;
  int train_order = 4;
  std::size_t train_len = 0;
  auto* train = app.add_subcommand("train", "fit a predictor and write it as JSON");
  train->add_option("-i,--panel", train_panel)->required();
  train->add_option("--target", train_target)->required();
  add_lag_flags(*train, train_lag);
  add_fit_flags(*train, train_fit);
  train->add_option("--train-len", train_len, "train on the first N rows only (0 = all)");
  train->add_option("-o,--output", train_out, "predictor JSON")->required();
  train->add_option("--markov-out", markov_out, "also fit the Markov chain baseline and write it here");
  train->add_option("--order", train_order, "Markov chain order")->check(CLI::PositiveNumber);

  // forecast
  std::string fc_model, fc_panel, fc_out;
  std::int64_t fc_start = 0, fc_end = 0;
  bool has_start = false, has_end = false;
  auto* fc = app.add_subcommand("forecast", "one-step forecasts from a saved predictor");
  fc->add_option("-m,--model", fc_model)->required();
  fc->add_option("-i,--panel", fc_panel)->required();
  auto* start_opt = fc->add_option("--start", fc_start, "first step index forecast (default: earliest possible)");
  auto* end_opt = fc->add_option("--end", fc_end, "one past the last step index (default: panel end)");
  fc->add_option("-o,--output", fc_out, "forecast CSV")->required();

  // evaluate
  std::string ev_panel, ev_out, ev_targets, ev_dump;
  ExperimentConfig ev_cfg;
  std::uint64_t ev_synth_seed = 0;
  auto* ev = app.add_subcommand("evaluate", "compare Random Walk, Markov Chain and STBN by RMSE");
  ev->add_option("-i,--panel", ev_panel, "panel CSV (default: synthetic panel from --synth-seed)");
  ev->add_option("--synth-seed", ev_synth_seed, "seed of the default synthetic panel");
  ev->add_option("--targets", ev_targets, "comma-separated target sites (default: first five)");
  add_lag_flags(*ev, ev_cfg.lag);
  add_fit_flags(*ev, ev_cfg.fit);
  ev->add_option("--order", ev_cfg.markov_order, "Markov chain order")->check(CLI::PositiveNumber);
  ev->add_option("--train-len", ev_cfg.train_len, "rows used for training")->check(CLI::PositiveNumber);
  ev->add_option("-o,--output", ev_out, "report CSV")->required();
  ev->add_option("--dump-dir", ev_dump, "write per-target forecast CSVs here");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  has_start = start_opt->count() > 0;
  has_end = end_opt->count() > 0;

  try {
    if (synth->parsed()) {
      const auto panel = generate_synthetic_network(spec, synth_seed);
      save_panel_csv(panel, synth_out);
      out << "wrote " << synth_out << ": " << panel.rows() << " rows x " << panel.sites() << " sites\n";
    } else if (rank->parsed()) {
      const auto panel = training_part(load_panel_csv(rank_panel, interval), rank_train_len);
      std::vector<LaggedVariable> dropped;
      const auto ranking = rank_lagged_variables(panel, rank_target, rank_lag, &dropped);
      for (const auto& v : dropped) err << "warning: " << to_string(v) << " has zero variance, skipped\n";
      auto file = open_out(rank_out);
      write_ranking_csv(ranking, file);
      const int k = std::min<int>(rank_lag.k, static_cast<int>(ranking.size()));
      print_cause_nodes_table(select_cause_nodes(ranking, rank_target, k), out);
    } else if (train->parsed()) {
      const auto panel = training_part(load_panel_csv(train_panel, interval), train_len);
      FitReport report;
      const auto predictor = train_stbn(panel, train_target, train_lag, train_fit, &report);
      save_predictor(predictor, train_out);
      print_cause_nodes_table(predictor.cause_nodes(), out);
      out << "mixture components: " << report.chosen_k << ", BIC " << report.bic << '\n';
      if (!markov_out.empty()) {
        const auto mc = train_markov_chain(panel, train_target, train_order, train_fit);
        save_predictor(mc, markov_out);
        out << "markov chain order " << train_order << ", components: " << mc.model().size() << '\n';
      }
    } else if (fc->parsed()) {
      const auto predictor = load_predictor(fc_model);
      const auto panel = load_panel_csv(fc_panel, interval);
      const auto& target = std::visit([](const auto& p) -> const std::string& { return p.target_site(); }, predictor);
      const auto inputs = std::visit([](const auto& p) { return p.inputs(); }, predictor);
      int max_lag = 0;
      for (const auto& v : inputs) max_lag = std::max(max_lag, v.lag);
      const std::int64_t first = panel.origin_index();
      const std::int64_t end = first + static_cast<std::int64_t>(panel.rows());
      const std::int64_t from = has_start ? fc_start : first + max_lag;
      const std::int64_t to = has_end ? fc_end : end;
      if (to > end || from >= to) {
        err << "error: forecast range [" << from << ", " << to << ") must be non-empty and within the panel\n";
        return kExitFailure;
      }
      const auto col = panel.site_index(target);
      auto file = open_out(fc_out);
      file << "t,truth,forecast\n";
      char buf[64];
      for (std::int64_t t = from; t < to; ++t) {
        const double y = forecast(predictor, panel, t);
        const double truth = t >= first ? panel.at(static_cast<std::size_t>(t - first), col) : 0.0;
        auto p = std::to_chars(buf, buf + sizeof(buf), truth).ptr;
        *p++ = ',';
        p = std::to_chars(p, buf + sizeof(buf), y).ptr;
        file << t << ',' << std::string_view(buf, static_cast<std::size_t>(p - buf)) << '\n';
      }
      out << "wrote " << (to - from) << " forecasts for " << target << " to " << fc_out << '\n';
    } else if (ev->parsed()) {
      const auto panel = ev_panel.empty() ? generate_synthetic_network(SyntheticSpec{}, ev_synth_seed)
                                          : load_panel_csv(ev_panel, interval);
      auto targets = split_list(ev_targets);
      if (targets.empty()) {
        const auto n = std::min<std::size_t>(5, panel.sites());
        targets.assign(panel.site_ids().begin(), panel.site_ids().begin() + static_cast<std::ptrdiff_t>(n));
      }
      const auto report = run_experiment(panel, targets, ev_cfg);
      auto file = open_out(ev_out);
      write_report_csv(report, file);
      print_report_table(report, out);
      if (!ev_dump.empty()) {
        std::filesystem::create_directories(ev_dump);
        for (const auto& f : report.forecasts) {
          auto dump = open_out((std::filesystem::path(ev_dump) / ("forecast_" + f.target + ".csv")).string());
          write_forecast_dump(f, dump);
        }
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    const bool usage = e.code() == ErrorCode::InvalidSpec || e.code() == ErrorCode::InvalidConfig;
    return usage ? kExitUsage : kExitFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace stbn
