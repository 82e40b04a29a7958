#pragma once

#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "xbar/characterize.hpp"

namespace xbar {

enum class AdcMode { Linear, Custom };

std::string_view to_string(AdcMode m);
AdcMode parse_adc_mode(std::string_view s);

/// Reference ladder: references[x-1] separates state x-1 from state x.
struct AdcSpec {
  AdcMode mode = AdcMode::Linear;
  std::vector<double> references;  // strictly increasing, amperes

  int n_states() const { return static_cast<int>(references.size()) + 1; }
  int x_max() const { return static_cast<int>(references.size()); }
};

// Minimal gap enforced between consecutive custom references.
inline constexpr double kMinReferenceSeparation = 1e-12;

/// Thresholds at (x - 0.5) * i_unit for x = 1..x_max.
AdcSpec linear_references(double i_unit, int x_max);

/// Thresholds at the midpoint between I_max(x-1) and I_min(x), then made
/// strictly increasing. No value if any state is absent from the table.
std::optional<AdcSpec> custom_references(const CharacterizationTable& table);

/// Raw midpoints before the monotonic repair; entry x-1 for threshold x.
std::optional<std::vector<double>> raw_custom_thresholds(const CharacterizationTable& table);

/// Number of references at or below `current` (a tie goes to the higher state).
int quantize(const AdcSpec& spec, double current);

double dummy_subtract(double column_current, double dummy_current);

// Delimited text: '#' metadata, then "state,threshold_A".
void write_ladder(std::ostream& os, const AdcSpec& spec);
AdcSpec read_ladder(std::istream& is);

struct LadderRow {
  int state = 0;
  double i_min = 0.0;
  double i_max = 0.0;
  double linear_ref = 0.0;
  double custom_ref = 0.0;
  double deviation = 0.0;  // custom - linear
};

/// Per-state rows {x, I_min, I_max, linear, custom, deviation} for x = 1..x_max.
std::vector<LadderRow> reference_ladder_report(const CharacterizationTable& table,
                                               const AdcSpec& linear, const AdcSpec& custom);
void write_ladder_report(std::ostream& os, const std::vector<LadderRow>& rows);

}  // namespace xbar
