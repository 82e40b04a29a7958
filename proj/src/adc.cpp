#include "xbar/adc.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "xbar/io.hpp"

namespace xbar {

std::string_view to_string(AdcMode m) { return m == AdcMode::Custom ? "custom" : "linear"; }

AdcMode parse_adc_mode(std::string_view s) {
  if (s == "linear") return AdcMode::Linear;
  if (s == "custom") return AdcMode::Custom;
  throw std::invalid_argument("unknown ADC mode '" + std::string(s) + "'");
}

AdcSpec linear_references(double i_unit, int x_max) {
  if (!(i_unit > 0.0)) throw std::invalid_argument("unit current must be > 0");
  if (x_max < 1) throw std::invalid_argument("x_max must be >= 1");
  AdcSpec spec;
  spec.mode = AdcMode::Linear;
  spec.references.resize(x_max);
  for (int x = 1; x <= x_max; ++x) spec.references[x - 1] = (x - 0.5) * i_unit;
  return spec;
}

std::optional<std::vector<double>> raw_custom_thresholds(const CharacterizationTable& table) {
  if (table.x_max() < 1) return std::nullopt;
  for (const auto& s : table.states)
    if (!s.present()) return std::nullopt;
  std::vector<double> raw(table.x_max());
  for (int x = 1; x <= table.x_max(); ++x)
    raw[x - 1] = 0.5 * (table.states[x - 1].i_max + table.states[x].i_min);
  return raw;
}

std::optional<AdcSpec> custom_references(const CharacterizationTable& table) {
  auto raw = raw_custom_thresholds(table);
  if (!raw) return std::nullopt;
  AdcSpec spec;
  spec.mode = AdcMode::Custom;
  spec.references = std::move(*raw);
  for (std::size_t k = 1; k < spec.references.size(); ++k)
    spec.references[k] = std::max(spec.references[k], spec.references[k - 1] + kMinReferenceSeparation);
  return spec;
}

int quantize(const AdcSpec& spec, double current) {
  const auto it = std::upper_bound(spec.references.begin(), spec.references.end(), current);
  return static_cast<int>(it - spec.references.begin());
}

double dummy_subtract(double column_current, double dummy_current) {
  return std::max(0.0, column_current - dummy_current);
}

void write_ladder(std::ostream& os, const AdcSpec& spec) {
  os << "# kind=ladder\n";
  os << "# mode=" << to_string(spec.mode) << "\n";
  os << "# n_states=" << spec.n_states() << "\n";
  os << "state,threshold_A\n";
  for (int x = 1; x <= spec.x_max(); ++x)
    os << x << ',' << io::format_double(spec.references[x - 1]) << '\n';
}

AdcSpec read_ladder(std::istream& is) {
  io::Metadata meta;
  std::string line;
  bool header = false;
  AdcSpec spec;
  while (std::getline(is, line)) {
    const auto t = io::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      io::parse_metadata_line(t, meta);
      continue;
    }
    if (!header) {
      if (t != "state,threshold_A") throw std::invalid_argument("ladder header not recognized");
      header = true;
      continue;
    }
    const auto f = io::split(t, ',');
    if (f.size() != 2) throw std::invalid_argument("ladder row needs 2 fields");
    if (io::parse_int(f[0]) != static_cast<long long>(spec.references.size() + 1))
      throw std::invalid_argument("ladder states must be consecutive from 1");
    spec.references.push_back(io::parse_double(f[1]));
  }
  if (!header) throw std::invalid_argument("ladder file is empty");
  spec.mode = parse_adc_mode(io::require(meta, "mode"));
  for (std::size_t k = 1; k < spec.references.size(); ++k)
    if (!(spec.references[k] > spec.references[k - 1]))
      throw std::invalid_argument("ladder references are not strictly increasing");
  return spec;
}

std::vector<LadderRow> reference_ladder_report(const CharacterizationTable& table,
                                               const AdcSpec& linear, const AdcSpec& custom) {
  if (linear.x_max() != table.x_max() || custom.x_max() != table.x_max())
    throw std::invalid_argument("reference ladders do not match the table's state count");
  std::vector<LadderRow> rows;
  rows.reserve(table.x_max());
  for (int x = 1; x <= table.x_max(); ++x) {
    LadderRow r;
    r.state = x;
    r.i_min = table.states[x].i_min;
    r.i_max = table.states[x].i_max;
    r.linear_ref = linear.references[x - 1];
    r.custom_ref = custom.references[x - 1];
    r.deviation = r.custom_ref - r.linear_ref;
    rows.push_back(r);
  }
  return rows;
}

void write_ladder_report(std::ostream& os, const std::vector<LadderRow>& rows) {
  using io::format_double;
  os << "state,i_min_A,i_max_A,linear_ref_A,custom_ref_A,deviation_A\n";
  for (const auto& r : rows)
    os << r.state << ',' << format_double(r.i_min) << ',' << format_double(r.i_max) << ','
       << format_double(r.linear_ref) << ',' << format_double(r.custom_ref) << ','
       << format_double(r.deviation) << '\n';
}

}  // namespace xbar
