#include "xbar/device.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xbar {

namespace {

TechnologyProfile make_profile(std::string name, double ratio_hrs, double ratio_off,
                               double height, Topology topology, double alpha,
                               int max_levels) {
  TechnologyProfile p;
  p.name = std::move(name);
  p.g_on = kDefaultGOn;
  p.ratio_hrs = ratio_hrs;
  p.ratio_off = ratio_off;
  p.cell_height_gp = height;
  p.topology = topology;
  p.degeneration = Degeneration{0.3, alpha};
  p.max_levels = max_levels;
  p.input_mode = InputMode::GInput;
  return p;
}

}  // namespace

void TechnologyProfile::validate() const {
  if (!(g_on > 0.0)) throw std::invalid_argument("profile " + name + ": g_on must be > 0");
  if (!(ratio_hrs > 1.0)) throw std::invalid_argument("profile " + name + ": ratio_hrs must be > 1");
  if (!(ratio_off > 1.0)) throw std::invalid_argument("profile " + name + ": ratio_off must be > 1");
  if (!(cell_height_gp > 0.0))
    throw std::invalid_argument("profile " + name + ": cell_height_gp must be > 0");
  if (!(degeneration.alpha >= 0.0 && degeneration.alpha <= 1.0))
    throw std::invalid_argument("profile " + name + ": alpha must lie in [0, 1]");
  if (!(degeneration.v_sat > 0.0))
    throw std::invalid_argument("profile " + name + ": v_sat must be > 0");
  if (max_levels < 2) throw std::invalid_argument("profile " + name + ": max_levels must be >= 2");
  if ((name == "sram8t" || name == "sot_mram") && max_levels != 2)
    throw std::invalid_argument("profile " + name + " cannot hold multi-level state");
}

std::vector<TechnologyProfile> builtin_profiles() {
  return {
      make_profile("sram8t", 3.5e6, 2.5e6, 2.0, Topology::TransistorDominated, 0.9, 2),
      make_profile("fefet", 66.0, 3.8e2, 1.0, Topology::TransistorDominated, 0.9, 4),
      make_profile("reram", 38.3, 3.5e3, 1.5, Topology::OneT1R, 0.1, 4),
      make_profile("sot_mram", 5.0, 1.0e4, 2.0, Topology::OneT1R, 0.1, 2),
  };
}

TechnologyProfile builtin_profile(std::string_view name) {
  for (auto& p : builtin_profiles())
    if (p.name == name) return p;
  throw std::invalid_argument("unknown technology '" + std::string(name) + "'");
}

std::string_view to_string(Topology t) {
  return t == Topology::OneT1R ? "1t1r" : "transistor";
}

std::string_view to_string(InputMode m) { return m == InputMode::DInput ? "d" : "g"; }

Topology parse_topology(std::string_view s) {
  if (s == "1t1r" || s == "one_t1r") return Topology::OneT1R;
  if (s == "transistor" || s == "transistor_dominated") return Topology::TransistorDominated;
  throw std::invalid_argument("unknown topology '" + std::string(s) + "'");
}

InputMode parse_input_mode(std::string_view s) {
  if (s == "g" || s == "g_input") return InputMode::GInput;
  if (s == "d" || s == "d_input") return InputMode::DInput;
  throw std::invalid_argument("unknown input mode '" + std::string(s) + "'");
}

void validate_state(const TechnologyProfile& profile, const CellState& state) {
  if (state.input_bit != 0 && state.input_bit != 1)
    throw std::invalid_argument("input bit must be 0 or 1");
  if (state.bit_slice != 1 && state.bit_slice != 2)
    throw std::invalid_argument("bit slice must be 1 or 2");
  if (state.bit_slice == 2 && profile.max_levels < 4)
    throw std::invalid_argument("profile " + profile.name + " cannot store 2 bits per cell");
  if (state.weight_level < 0 || state.weight_level >= (1 << state.bit_slice))
    throw std::invalid_argument("weight level out of range for bit slice");
  if (state.weight_level >= profile.max_levels)
    throw std::invalid_argument("weight level exceeds profile max_levels");
}

double level_conductance(const TechnologyProfile& profile, int weight_level) {
  const double g_hrs = profile.g_hrs();
  if (weight_level == 0) return g_hrs;
  // Level 1 sits exactly at g_on; higher levels keep the same step above HRS.
  return g_hrs + weight_level * (profile.g_on - g_hrs);
}

double cell_conductance(const TechnologyProfile& profile, const CellState& state) {
  validate_state(profile, state);
  if (state.input_bit == 0) return profile.g_off();
  return level_conductance(profile, state.weight_level);
}

double series_conductance(const Degeneration& deg, double g_cell, double v_source) {
  if (deg.alpha == 0.0) return g_cell;
  const double factor = std::max(kDegenerationFloor, 1.0 - std::max(0.0, v_source) / deg.v_sat);
  if (factor == 1.0) return g_cell;
  const double r_cell = 1.0 / g_cell;
  return 1.0 / ((1.0 - deg.alpha) * r_cell + deg.alpha * r_cell / factor);
}

double cell_current(const TechnologyProfile& profile, const CellState& state,
                    double v_drive, double v_source) {
  const double g = cell_conductance(profile, state);
  v_source = std::max(0.0, v_source);
  v_drive = std::max(v_drive, v_source);
  return series_conductance(profile.degeneration, g, v_source) * (v_drive - v_source);
}

}  // namespace xbar
