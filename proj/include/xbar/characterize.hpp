#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "xbar/crossbar.hpp"

namespace xbar {

// Non-ideality factor |I_ideal - I| / I_ideal. No value when I_ideal is zero.
std::optional<double> non_ideality_factor(double i_ideal, double i_nonideal);

struct SamplerParams {
  double density_in = 0.3;
  double density_w = 0.5;
  int n_per_state = 200;
  std::uint64_t seed = 1;
};

struct StateRange {
  double i_min = 0.0;
  double i_max = 0.0;
  std::int64_t n_samples = 0;
  bool present() const { return n_samples > 0; }
};

/// Per-output-state {min, max} of the current the ADC sees on the measured
/// column (after dummy-column subtraction when the array has one).
struct CharacterizationTable {
  std::string profile_name;
  CrossbarConfig config;
  int bit_slice = 1;
  int active_rows = 0;
  int mask_begin = 0;
  SamplerParams sampler;
  double unit_current = 0.0;  // ideal current step between adjacent states, amperes
  std::vector<StateRange> states;  // index = output state, 0..x_max

  int x_max() const { return static_cast<int>(states.size()) - 1; }
};

/// SM_x = (I_min(x) - I_max(x-1)) / 2; no value if either state is absent.
std::optional<double> sense_margin(const CharacterizationTable& table, int x);

struct MetricsReport {
  std::vector<std::optional<double>> sense_margins;  // index x; entry 0 always empty
  double min_sense_margin = 0.0;
  std::optional<int> first_negative_state;
  double max_nf = 0.0;
};

MetricsReport summarize(const CharacterizationTable& table, const std::vector<double>& nf_values = {});

/// One solved pattern: the digital state it encodes and the ADC-side current.
struct CharacterizationSample {
  int state = 0;
  double current = 0.0;
  double raw_current = 0.0;    // measured column before dummy subtraction
  double ideal_current = 0.0;  // parasitic-free raw current
};

struct CharacterizationSpec {
  TechnologyProfile profile;
  CrossbarConfig config;
  int bit_slice = 1;
  int active_rows = 0;  // <= config.rows; 0 means all rows
  int mask_begin = 0;   // first active row (contiguous block)
  SamplerParams sampler;
};

int max_state(int active_rows, int bit_slice);

/// Stratified sampling: for every output state, n_per_state patterns whose
/// measured-column product sum equals that state exactly.
std::vector<CharacterizationSample> sample_states(const CharacterizationSpec& spec);

/// Every input/weight combination of the measured column (small arrays only).
std::vector<CharacterizationSample> enumerate_states(const CharacterizationSpec& spec);

CharacterizationTable build_table(const CharacterizationSpec& spec,
                                  const std::vector<CharacterizationSample>& samples);

CharacterizationTable characterize(const CharacterizationSpec& spec);

// Delimited text: '#' metadata lines, then "state,i_min_A,i_max_A,n".
void write_table(std::ostream& os, const CharacterizationTable& table);
CharacterizationTable read_table(std::istream& is);

}  // namespace xbar
