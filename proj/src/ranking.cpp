#include "stbn/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "stbn/error.hpp"

namespace stbn {

std::string to_string(const LaggedVariable& v) { return v.site_id + "(t-" + std::to_string(v.lag) + ")"; }

int CauseNodeSet::max_lag() const noexcept {
  int m = 0;
  for (const auto& v : variables) m = std::max(m, v.lag);
  return m;
}

void LagConfig::validate(std::size_t n_sites) const {
  if (d < 1) throw Error(ErrorCode::InvalidConfig, "max lag d must be >= 1");
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "cause-node count k must be >= 1");
  if (static_cast<std::size_t>(k) > n_sites * static_cast<std::size_t>(d)) {
    throw Error(ErrorCode::InvalidConfig, "k exceeds the number of lagged candidates");
  }
}

namespace {

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

}  // namespace

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorCode::LengthMismatch,
                "pearson: " + std::to_string(xs.size()) + " vs " + std::to_string(ys.size()) + " samples");
  }
  const std::size_t m = xs.size();
  if (m < 2) throw Error(ErrorCode::TooFewSamples, "pearson needs at least 2 samples");
  if (is_constant(xs) || is_constant(ys)) throw Error(ErrorCode::ZeroVariance, "pearson: constant sequence");

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);

  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::ZeroVariance, "pearson: zero sum of squares");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

Eigen::MatrixXd build_training_rows(const FlowPanel& panel, std::string_view target,
                                    std::span<const LaggedVariable> variables) {
  const std::size_t target_col = panel.site_index(target);
  std::vector<std::size_t> cols;
  int max_lag = 0;
  for (const auto& v : variables) {
    if (v.lag < 1) throw Error(ErrorCode::InvalidConfig, "lag must be >= 1 for " + to_string(v));
    cols.push_back(panel.site_index(v.site_id));
    max_lag = std::max(max_lag, v.lag);
  }
  const auto T = panel.rows();
  if (T <= static_cast<std::size_t>(max_lag)) {
    throw Error(ErrorCode::PanelTooShort,
                "panel has " + std::to_string(T) + " rows, max lag is " + std::to_string(max_lag));
  }
  const std::size_t m = T - static_cast<std::size_t>(max_lag);
  const auto k = static_cast<Eigen::Index>(variables.size());
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(m), k + 1);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t t = r + static_cast<std::size_t>(max_lag);
    for (Eigen::Index i = 0; i < k; ++i) {
      rows(static_cast<Eigen::Index>(r), i) = panel.at(t - static_cast<std::size_t>(variables[i].lag), cols[i]);
    }
    rows(static_cast<Eigen::Index>(r), k) = panel.at(t, target_col);
  }
  return rows;
}

std::vector<RankingEntry> rank_lagged_variables(const FlowPanel& train, std::string_view target,
                                                const LagConfig& cfg, std::vector<LaggedVariable>* dropped) {
  cfg.validate(train.sites());
  const auto target_series = train.series(target);
  const auto T = train.rows();
  const auto d = static_cast<std::size_t>(cfg.d);
  if (T <= d + 1) {
    throw Error(ErrorCode::PanelTooShort,
                "ranking needs more than d+1 = " + std::to_string(d + 1) + " rows, panel has " + std::to_string(T));
  }
  const std::size_t window = T - d;
  const std::span<const double> ys(target_series.data() + d, window);

  std::vector<RankingEntry> entries;
  entries.reserve(train.sites() * d);
  for (std::size_t s = 0; s < train.sites(); ++s) {
    const auto series = train.series(s);
    for (int lag = 1; lag <= cfg.d; ++lag) {
      const std::span<const double> xs(series.data() + (d - static_cast<std::size_t>(lag)), window);
      LaggedVariable var{train.site_ids()[s], lag};
      try {
        const double r = pearson(xs, ys);
        entries.push_back({std::move(var), r, std::abs(r)});
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroVariance) throw;
        if (dropped != nullptr) dropped->push_back(std::move(var));
      }
    }
  }
  std::sort(entries.begin(), entries.end(), [](const RankingEntry& a, const RankingEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.variable.lag != b.variable.lag) return a.variable.lag < b.variable.lag;
    return a.variable.site_id < b.variable.site_id;
  });
  return entries;
}

CauseNodeSet select_cause_nodes(std::span<const RankingEntry> ranking, std::string_view target, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "k must be >= 1");
  if (ranking.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::NotEnoughCandidates, "ranking has " + std::to_string(ranking.size()) +
                                                    " candidates, " + std::to_string(k) + " requested");
  }
  CauseNodeSet nodes;
  nodes.target_site = std::string(target);
  for (int i = 0; i < k; ++i) {
    nodes.variables.push_back(ranking[static_cast<std::size_t>(i)].variable);
    nodes.scores.push_back(ranking[static_cast<std::size_t>(i)].score);
  }
  return nodes;
}

void write_ranking_csv(std::span<const RankingEntry> ranking, std::ostream& out) {
  out << "rank,site,lag,r_signed,score\n";
  char buf[128];
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    const auto& e = ranking[i];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g", e.r_signed, e.score);
    out << (i + 1) << ',' << e.variable.site_id << ',' << e.variable.lag << ',' << buf << '\n';
  }
}

void print_cause_nodes_table(const CauseNodeSet& nodes, std::ostream& out) {
  const std::string head = nodes.target_site + "(t)";
  std::size_t width = 0;
  for (const auto& v : nodes.variables) width = std::max(width, to_string(v).size());
  width = std::max<std::size_t>(width, 6) + 2;

  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  const std::size_t lead = std::max<std::size_t>(head.size(), 8) + 2;
  std::string names = pad(head, lead);
  std::string coefs = pad("", lead);
  char buf[32];
  for (std::size_t i = 0; i < nodes.variables.size(); ++i) {
    names += pad(to_string(nodes.variables[i]), width);
    std::snprintf(buf, sizeof(buf), "%.3f", nodes.scores[i]);
    coefs += pad(buf, width);
  }
  out << names << '\n' << coefs << '\n';
}

}  // namespace stbn
