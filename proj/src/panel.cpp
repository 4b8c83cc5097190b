#include "stbn/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <unordered_set>

#include "stbn/error.hpp"

namespace stbn {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

double parse_flow(std::string_view field, std::size_t line_no) {
  double value = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw Error(ErrorCode::NonNumeric,
                "line " + std::to_string(line_no) + ": '" + std::string(field) + "' is not a finite number");
  }
  return value;
}

std::int64_t parse_index(std::string_view field, std::size_t line_no) {
  std::int64_t value = 0;
  const auto* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), last, value);
  if (field.empty() || ec != std::errc() || ptr != last) {
    throw Error(ErrorCode::NonNumeric,
                "line " + std::to_string(line_no) + ": index '" + std::string(field) + "' is not an integer");
  }
  return value;
}

void append_double(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

FlowPanel::FlowPanel(std::vector<std::string> site_ids, int interval_minutes, std::vector<double> values,
                     std::int64_t origin_index)
    : site_ids_(std::move(site_ids)),
      interval_minutes_(interval_minutes),
      values_(std::move(values)),
      origin_index_(origin_index),
      rows_(0) {
  if (site_ids_.empty()) throw Error(ErrorCode::EmptyPanel, "panel has no sites");
  if (interval_minutes_ <= 0) throw Error(ErrorCode::InvalidSpec, "interval_minutes must be positive");
  std::unordered_set<std::string> seen;
  for (const auto& id : site_ids_) {
    if (!seen.insert(id).second) throw Error(ErrorCode::DuplicateSiteId, "site id '" + id + "' appears twice");
  }
  if (values_.size() % site_ids_.size() != 0) {
    throw Error(ErrorCode::RaggedRow, "value count is not a multiple of the site count");
  }
  rows_ = values_.size() / site_ids_.size();
  if (rows_ == 0) throw Error(ErrorCode::EmptyPanel, "panel has no rows");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double v = values_[i];
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::NonNumeric, "non-finite flow at row " + std::to_string(i / sites()));
    }
    if (v < 0.0) {
      throw Error(ErrorCode::NegativeFlow, "negative flow at row " + std::to_string(i / sites()) + ", site '" +
                                               site_ids_[i % sites()] + "'");
    }
  }
}

std::size_t FlowPanel::site_index(std::string_view site) const {
  const auto it = std::find(site_ids_.begin(), site_ids_.end(), site);
  if (it == site_ids_.end()) throw Error(ErrorCode::UnknownSite, "site '" + std::string(site) + "' not in panel");
  return static_cast<std::size_t>(it - site_ids_.begin());
}

bool FlowPanel::has_site(std::string_view site) const noexcept {
  return std::find(site_ids_.begin(), site_ids_.end(), site) != site_ids_.end();
}

std::vector<double> FlowPanel::series(std::string_view site) const { return series(site_index(site)); }

std::vector<double> FlowPanel::series(std::size_t site) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = at(r, site);
  return out;
}

FlowPanel FlowPanel::slice(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > rows_) throw Error(ErrorCode::BadSplit, "invalid row range");
  std::vector<double> vals(values_.begin() + static_cast<std::ptrdiff_t>(begin * sites()),
                           values_.begin() + static_cast<std::ptrdiff_t>(end * sites()));
  return FlowPanel(site_ids_, interval_minutes_, std::move(vals), origin_index_ + static_cast<std::int64_t>(begin));
}

FlowPanel parse_panel_csv(std::istream& in, int interval_minutes) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error(ErrorCode::BadHeader, "empty file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line);
  if (header.size() < 2 || header[0] != "t") {
    throw Error(ErrorCode::BadHeader, "header must be 't,<site_id>,...'");
  }
  std::vector<std::string> sites;
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (header[i].empty()) throw Error(ErrorCode::BadHeader, "empty site id in header");
    sites.emplace_back(header[i]);
  }
  {
    std::unordered_set<std::string> seen;
    for (const auto& s : sites) {
      if (!seen.insert(s).second) throw Error(ErrorCode::DuplicateSiteId, "site id '" + s + "' appears twice");
    }
  }

  std::vector<double> values;
  std::int64_t origin = 0;
  std::int64_t previous = 0;
  bool first_row = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != sites.size() + 1) {
      throw Error(ErrorCode::RaggedRow, "line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                                            " fields, expected " + std::to_string(sites.size() + 1));
    }
    const auto index = parse_index(fields[0], line_no);
    if (first_row) {
      origin = index;
      first_row = false;
    } else if (index != previous + 1) {
      throw Error(ErrorCode::NonConsecutiveIndex, "line " + std::to_string(line_no) + ": index " +
                                                      std::to_string(index) + " follows " + std::to_string(previous));
    }
    previous = index;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const double v = parse_flow(fields[i], line_no);
      if (v < 0.0) {
        throw Error(ErrorCode::NegativeFlow,
                    "line " + std::to_string(line_no) + ": negative flow for site '" + sites[i - 1] + "'");
      }
      values.push_back(v);
    }
  }
  if (values.empty()) throw Error(ErrorCode::EmptyPanel, "no data rows");
  return FlowPanel(std::move(sites), interval_minutes, std::move(values), origin);
}

FlowPanel load_panel_csv(const std::filesystem::path& path, int interval_minutes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open '" + path.string() + "'");
  return parse_panel_csv(in, interval_minutes);
}

void write_panel_csv(const FlowPanel& panel, std::ostream& out) {
  std::string buf = "t";
  for (const auto& id : panel.site_ids()) {
    buf += ',';
    buf += id;
  }
  buf += '\n';
  for (std::size_t r = 0; r < panel.rows(); ++r) {
    buf += std::to_string(panel.origin_index() + static_cast<std::int64_t>(r));
    for (const double v : panel.row(r)) {
      buf += ',';
      append_double(buf, v);
    }
    buf += '\n';
  }
  out << buf;
}

void save_panel_csv(const FlowPanel& panel, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  write_panel_csv(panel, out);
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

std::pair<FlowPanel, FlowPanel> split_chronological(const FlowPanel& panel, std::size_t train_len) {
  if (train_len == 0 || train_len >= panel.rows()) {
    throw Error(ErrorCode::BadSplit, "train_len " + std::to_string(train_len) + " must lie in [1, " +
                                         std::to_string(panel.rows() - 1) + "]");
  }
  return {panel.slice(0, train_len), panel.slice(train_len, panel.rows())};
}

// ---------------------------------------------------------------------------
// Synthetic hidden-source network

namespace {

// Shape constants of the latent daily profiles (veh/hr before per-site gain).
// Each harmonic contributes amp * (1 + sin(.)) >= 0, so sources model
// non-negative activity and clipping stays a rare tail event.
constexpr double kFundamentalAmpMin = 30.0;
constexpr double kFundamentalAmpMax = 60.0;
constexpr double kHarmonicAmpMin = 5.0;
constexpr double kHarmonicAmpMax = 15.0;
constexpr double kDriftPersistence = 0.98;
constexpr double kDriftStepStd = 4.0;

}  // namespace

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidSpec, what); };
  if (n_sites <= 0) fail("n_sites must be positive");
  if (n_sources <= 0) fail("n_sources must be positive");
  if (length <= 0) fail("length must be positive");
  if (steps_per_day <= 0) fail("steps_per_day must be positive");
  if (delay_min < 0) fail("delay_range lower bound must be >= 0");
  if (delay_max < delay_min) fail("delay_range is empty");
  if (!(gain_min > 0.0)) fail("gain_range lower bound must be > 0");
  if (!(gain_max >= gain_min) || !std::isfinite(gain_max)) fail("gain_range is empty");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) fail("noise_std must be >= 0");
  if (!(base_level >= 0.0) || !std::isfinite(base_level)) fail("base_level must be >= 0");
}

std::string synthetic_site_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "S%02d", index);
  return buf;
}

double source_value(const SyntheticSource& source, const SyntheticSpec& spec, std::int64_t t) {
  double v = 0.0;
  const double base_freq = 2.0 * std::numbers::pi / static_cast<double>(spec.steps_per_day);
  for (std::size_t h = 0; h < source.harmonic_amplitude.size(); ++h) {
    v += source.harmonic_amplitude[h] *
         (1.0 + std::sin(base_freq * static_cast<double>(h + 1) * static_cast<double>(t) + source.harmonic_phase[h]));
  }
  return v + source.drift[static_cast<std::size_t>(t + spec.delay_max)];
}

SyntheticNetwork generate_synthetic_network_detailed(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const auto span = static_cast<std::size_t>(spec.length + spec.delay_max);
  SyntheticNetwork net{.sources = {}, .gains = {}, .delays = {}, .panel = FlowPanel({"_"}, 1, {0.0})};
  for (int j = 0; j < spec.n_sources; ++j) {
    SyntheticSource src;
    const int n_harmonics = 1 + static_cast<int>(rng() % 3);
    for (int h = 0; h < n_harmonics; ++h) {
      src.harmonic_amplitude.push_back(h == 0 ? uniform(kFundamentalAmpMin, kFundamentalAmpMax)
                                              : uniform(kHarmonicAmpMin, kHarmonicAmpMax));
      src.harmonic_phase.push_back(uniform(0.0, 2.0 * std::numbers::pi));
    }
    src.drift.resize(span);
    double level = 0.0;
    for (auto& d : src.drift) {
      level = kDriftPersistence * level + kDriftStepStd * gauss(rng);
      d = level;
    }
    net.sources.push_back(std::move(src));
  }

  const int delay_count = spec.delay_max - spec.delay_min + 1;
  net.gains.assign(static_cast<std::size_t>(spec.n_sites), {});
  net.delays.assign(static_cast<std::size_t>(spec.n_sites), {});
  for (int s = 0; s < spec.n_sites; ++s) {
    for (int j = 0; j < spec.n_sources; ++j) {
      net.gains[s].push_back(uniform(spec.gain_min, spec.gain_max));
      net.delays[s].push_back(spec.delay_min + static_cast<int>(rng() % static_cast<std::uint64_t>(delay_count)));
    }
  }

  std::vector<std::string> ids;
  for (int s = 0; s < spec.n_sites; ++s) ids.push_back(synthetic_site_id(s));

  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(spec.length) * static_cast<std::size_t>(spec.n_sites));
  for (std::int64_t t = 0; t < spec.length; ++t) {
    for (int s = 0; s < spec.n_sites; ++s) {
      double v = spec.base_level;
      for (int j = 0; j < spec.n_sources; ++j) {
        v += net.gains[s][j] * source_value(net.sources[j], spec, t - net.delays[s][j]);
      }
      if (spec.noise_std > 0.0) v += spec.noise_std * gauss(rng);
      values.push_back(std::max(0.0, v));
    }
  }
  net.panel = FlowPanel(std::move(ids), 24 * 60 / spec.steps_per_day > 0 ? 24 * 60 / spec.steps_per_day : 1,
                        std::move(values), 0);
  return net;
}

FlowPanel generate_synthetic_network(const SyntheticSpec& spec, std::uint64_t seed) {
  return generate_synthetic_network_detailed(spec, seed).panel;
}

}  // namespace stbn
