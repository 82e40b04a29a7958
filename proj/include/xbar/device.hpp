#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace xbar {

enum class Topology { TransistorDominated, OneT1R };
enum class InputMode { GInput, DInput };

// Fraction `alpha` of the cell resistance sits in the access transistor; that
// part loses conductance linearly as the source node rises toward `v_sat`.
struct Degeneration {
  double v_sat = 0.3;
  double alpha = 0.9;
};

/// Electrical parameters of one memory technology's bit-cell.
///
/// Conductance levels are expressed through ratios against `g_on`, the cell
/// conductance for input 1 / weight 1:
///   In=0, any W      -> g_on / ratio_off
///   In=1, W=0        -> g_on / ratio_hrs
///   In=1, W=k >= 1   -> g_hrs + k * (g_on - g_hrs)
struct TechnologyProfile {
  std::string name = "custom";
  double g_on = 50e-6;
  double ratio_hrs = 10.0;
  double ratio_off = 100.0;
  double cell_height_gp = 1.0;
  Topology topology = Topology::TransistorDominated;
  Degeneration degeneration{};
  int max_levels = 2;
  InputMode input_mode = InputMode::GInput;

  double g_hrs() const { return g_on / ratio_hrs; }
  double g_off() const { return g_on / ratio_off; }

  // Throws std::invalid_argument on a violated invariant.
  void validate() const;
};

struct CellState {
  int input_bit = 0;
  int weight_level = 0;
  int bit_slice = 1;
};

inline constexpr double kDegenerationFloor = 1e-3;
inline constexpr double kDefaultGOn = 50e-6;

/// sram8t, fefet, reram, sot_mram with their resistance ratios and cell heights.
std::vector<TechnologyProfile> builtin_profiles();

/// Looks up a builtin profile by name; throws std::invalid_argument if unknown.
TechnologyProfile builtin_profile(std::string_view name);

std::string_view to_string(Topology t);
std::string_view to_string(InputMode m);
Topology parse_topology(std::string_view s);
InputMode parse_input_mode(std::string_view s);

// Throws std::invalid_argument when the state is not representable on the profile.
void validate_state(const TechnologyProfile& profile, const CellState& state);

/// Small-signal cell conductance with no degeneration (siemens).
double cell_conductance(const TechnologyProfile& profile, const CellState& state);

/// Conductance for input 1 at a given weight level; no state validation.
double level_conductance(const TechnologyProfile& profile, int weight_level);

/// Effective series conductance of a cell of total conductance `g_cell` when its
/// source node sits at `v_source`.
double series_conductance(const Degeneration& deg, double g_cell, double v_source);

/// Cell current with source degeneration. Inputs are clamped so that
/// v_drive >= v_source >= 0.
double cell_current(const TechnologyProfile& profile, const CellState& state,
                    double v_drive, double v_source);

}  // namespace xbar
