#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "stbn/panel.hpp"

namespace stbn {

/// A site's flow `lag` steps before the prediction instant, e.g. Fe(t-3).
struct LaggedVariable {
  std::string site_id;
  int lag = 1;

  friend bool operator==(const LaggedVariable&, const LaggedVariable&) = default;
};

/// "Fe(t-3)"
std::string to_string(const LaggedVariable& v);

struct RankingEntry {
  LaggedVariable variable;
  double r_signed = 0.0;
  double score = 0.0;  // |r_signed|
};

struct CauseNodeSet {
  std::string target_site;
  std::vector<LaggedVariable> variables;
  std::vector<double> scores;

  std::size_t size() const noexcept { return variables.size(); }
  int max_lag() const noexcept;
};

struct LagConfig {
  int d = 100;  // maximum lag searched
  int k = 4;    // number of cause nodes kept

  void validate(std::size_t n_sites) const;
};

/// Sample Pearson correlation, clamped to [-1, 1].
/// Throws LengthMismatch, TooFewSamples (m < 2) or ZeroVariance.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// One row [x_1 .. x_k, y] per t in [max_lag, T), x_i = site_i(t - lag_i),
/// y = target(t). Rows are returned as an m x (k+1) matrix.
Eigen::MatrixXd build_training_rows(const FlowPanel& panel, std::string_view target,
                                    std::span<const LaggedVariable> variables);

/// Scores every (site, lag) with 1 <= lag <= d against the target over the
/// common window t in [d, T), sorted by |R| descending, ties by smaller lag
/// then site id. Constant candidates are skipped and appended to `dropped`
/// when it is non-null.
std::vector<RankingEntry> rank_lagged_variables(const FlowPanel& train, std::string_view target,
                                                const LagConfig& cfg,
                                                std::vector<LaggedVariable>* dropped = nullptr);

/// Best-first: the first k entries of the ranking.
CauseNodeSet select_cause_nodes(std::span<const RankingEntry> ranking, std::string_view target, int k);

/// `rank,site,lag,r_signed,score`
void write_ranking_csv(std::span<const RankingEntry> ranking, std::ostream& out);

/// Two-line block: variable names, then coefficients under them.
void print_cause_nodes_table(const CauseNodeSet& nodes, std::ostream& out);

}  // namespace stbn
