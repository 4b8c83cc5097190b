#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace stbn {

/// Rectangular multi-site flow series (veh/hr) sampled at a fixed interval.
///
/// Rows are time steps, columns are sites. Row r corresponds to the absolute
/// step index origin_index() + r. Values are immutable once constructed.
class FlowPanel {
 public:
  /// Validates the panel invariants: at least one row, no duplicate site ids,
  /// values.size() == rows * sites, every value finite and non-negative.
  FlowPanel(std::vector<std::string> site_ids, int interval_minutes, std::vector<double> values,
            std::int64_t origin_index = 0);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t sites() const noexcept { return site_ids_.size(); }
  const std::vector<std::string>& site_ids() const noexcept { return site_ids_; }
  int interval_minutes() const noexcept { return interval_minutes_; }
  std::int64_t origin_index() const noexcept { return origin_index_; }

  double at(std::size_t row, std::size_t site) const noexcept { return values_[row * sites() + site]; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * sites(), sites()};
  }
  /// Row-major T x S storage.
  std::span<const double> values() const noexcept { return values_; }

  /// Column index of a site; throws UnknownSite.
  std::size_t site_index(std::string_view site) const;
  bool has_site(std::string_view site) const noexcept;
  std::vector<double> series(std::string_view site) const;
  std::vector<double> series(std::size_t site) const;

  /// Rows [begin, end) as a new panel; origin shifts accordingly.
  FlowPanel slice(std::size_t begin, std::size_t end) const;

  friend bool operator==(const FlowPanel&, const FlowPanel&) = default;

 private:
  std::vector<std::string> site_ids_;
  int interval_minutes_;
  std::vector<double> values_;
  std::int64_t origin_index_;
  std::size_t rows_;
};

/// Parses the `t,<site>,...` CSV layout. The interval is not part of the file
/// and is supplied by the caller.
FlowPanel load_panel_csv(const std::filesystem::path& path, int interval_minutes = 15);
FlowPanel parse_panel_csv(std::istream& in, int interval_minutes = 15);

/// Writes the panel with shortest round-trip decimals and LF line endings.
void write_panel_csv(const FlowPanel& panel, std::ostream& out);
void save_panel_csv(const FlowPanel& panel, const std::filesystem::path& path);

/// Train = rows [0, train_len), test = rows [train_len, T).
std::pair<FlowPanel, FlowPanel> split_chronological(const FlowPanel& panel, std::size_t train_len);

struct SyntheticSpec {
  int n_sites = 10;
  int n_sources = 3;
  int length = 2400;
  int steps_per_day = 96;
  int delay_min = 1;
  int delay_max = 8;
  double gain_min = 0.5;
  double gain_max = 2.0;
  double noise_std = 15.0;
  double base_level = 200.0;

  void validate() const;
};

/// Latent source draw, exposed so tests can re-evaluate the site recurrence.
struct SyntheticSource {
  std::vector<double> harmonic_amplitude;  // harmonic h+1 has period steps_per_day / (h+1)
  std::vector<double> harmonic_phase;
  /// Slow drift sampled on steps [-delay_max, length).
  std::vector<double> drift;
};

struct SyntheticNetwork {
  std::vector<SyntheticSource> sources;
  /// gains[site][source], delays[site][source]
  std::vector<std::vector<double>> gains;
  std::vector<std::vector<int>> delays;
  FlowPanel panel;
};

/// Value of a latent source at step t (t may be negative down to -delay_max).
double source_value(const SyntheticSource& source, const SyntheticSpec& spec, std::int64_t t);

/// Hidden-source network: every site is base_level plus a delayed, scaled
/// sum of shared daily sources plus Gaussian noise, clipped below at zero.
/// Same (spec, seed) gives a bit-identical result.
SyntheticNetwork generate_synthetic_network_detailed(const SyntheticSpec& spec, std::uint64_t seed);
FlowPanel generate_synthetic_network(const SyntheticSpec& spec, std::uint64_t seed);

/// Site ids used by the generator: S00, S01, ...
std::string synthetic_site_id(int index);

}  // namespace stbn
