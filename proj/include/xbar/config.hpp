#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "xbar/inference.hpp"

namespace xbar {

// Grid axes for the sweep subcommand. Empty axes fall back to the single
// value of the corresponding scalar setting.
struct SweepGrid {
  std::vector<int> arrays;
  std::vector<std::string> techs;
  std::vector<int> pwa_groups;  // 0 = full activation
  std::vector<AdcMode> adc_modes;
  std::vector<int> bit_slices;
  std::vector<double> wires;
  std::vector<std::uint64_t> seeds;
};

/// Everything a subcommand can be told, with defaults. Keys are addressed as
/// "section.key" in both config files and --set overrides.
struct ExperimentConfig {
  std::string tech = "fefet";
  TechnologyProfile profile = builtin_profile("fefet");
  CrossbarConfig crossbar;
  int bit_slice = 1;
  int pwa_group = 0;
  int weight_bits = 4;
  int input_bits = 4;
  AdcMode adc_mode = AdcMode::Linear;
  SamplerParams sampler;
  int active_rows = 0;  // characterization window; 0 = all rows
  int mask_begin = 0;
  int matrix_rows = 16;
  int matrix_cols = 16;
  bool signed_weights = false;
  std::string workload = "digits8x8";
  std::vector<int> hidden;  // empty: workload default
  int epochs = 60;
  int max_test_samples = 0;
  std::uint64_t seed = 1;
  int workers = 1;  // sweep threads; 0 = one per hardware thread
  SweepGrid grid;
  std::string table_path;
  std::string results_path;
  std::string report_kind = "array-size";

  HardwareConfig hardware() const;
  TrainOptions training() const;
  EvalOptions evaluation() const;
};

using Assignment = std::pair<std::string, std::string>;  // "section.key", value

/// Every key the schema accepts, in canonical order.
const std::vector<std::string>& config_keys();

/// Applies assignments in order, except that profile.tech always goes first
/// (it resets the profile, the remaining profile keys refine it).
/// Unknown keys and bad values throw ConfigError naming the key.
void apply_assignments(ExperimentConfig& cfg, std::vector<Assignment> assignments);

/// Section/key pairs of an INI file, in file order.
std::vector<Assignment> read_config_file(const std::string& path);

/// The complete resolved configuration as INI text.
void write_config(std::ostream& os, const ExperimentConfig& cfg);

std::string get_value(const ExperimentConfig& cfg, const std::string& key);

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace xbar
