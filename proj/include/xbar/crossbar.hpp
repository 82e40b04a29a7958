#pragma once

#include <Eigen/Core>

#include "xbar/device.hpp"

namespace xbar {

// Per-row 0/1 vectors. Input bits and row masks share the representation;
// the effective activation of a row is input AND mask.
using BitVector = Eigen::VectorXi;

BitVector full_mask(int rows);
BitVector range_mask(int rows, int begin, int end);

/// Array geometry and parasitic network.
///
/// Every column owns a drive rail fed from `v_read` through `driver_res` at
/// the top (row 0) and a sense line that drains through `sink_res` to ground
/// at the bottom (row rows-1). Adjacent cells on either line are separated by
/// one wire segment of `wire_res_per_gp * cell_height_gp` ohms.
struct CrossbarConfig {
  int rows = 64;
  int cols = 64;
  double wire_res_per_gp = 2.0;
  double driver_res = 100.0;
  double sink_res = 50.0;
  double v_read = 0.1;
  bool dummy_column = true;
  double tol_v = 1e-9;
  int max_iters = 100;

  void validate() const;

  // All parasitic resistances zeroed; everything else kept.
  CrossbarConfig ideal() const;
};

/// A built array: weight levels mapped to conductances.
struct CrossbarInstance {
  CrossbarConfig config;
  TechnologyProfile profile;
  int bit_slice = 1;
  double segment_res = 0.0;
  // rows x physical_cols; the dummy column (if any) is last and all zero.
  Eigen::MatrixXi levels;
  Eigen::MatrixXd g_input_high;  // conductance for In=1
  Eigen::MatrixXd g_input_low;   // conductance for In=0

  int rows() const { return static_cast<int>(levels.rows()); }
  int physical_cols() const { return static_cast<int>(levels.cols()); }
  bool has_dummy() const { return config.dummy_column; }
  int dummy_index() const { return physical_cols() - 1; }
};

struct SolveResult {
  Eigen::VectorXd sl_currents;      // per physical column, amperes
  Eigen::MatrixXd drive_voltages;   // rows x physical_cols
  Eigen::MatrixXd sense_voltages;   // rows x physical_cols
  int iterations = 0;
  bool converged = true;
};

CrossbarInstance build_crossbar(const TechnologyProfile& profile, const CrossbarConfig& config,
                                const Eigen::MatrixXi& weights, int bit_slice);

/// Fixed-point solve of the full array: cell conductances are re-linearized at
/// the current sense-node voltages and the sparse nodal system is re-solved
/// until the largest node update falls below `tol_v` and each column current
/// has settled to 1e-8 relative.
SolveResult solve(const CrossbarInstance& instance, const BitVector& input_bits,
                  const BitVector& row_mask);

/// Same as solve() restricted to one physical column. Columns share no
/// conductive path, so this is exact for that column.
struct ColumnSolve {
  double sl_current = 0.0;
  Eigen::VectorXd drive_voltages;
  Eigen::VectorXd sense_voltages;
  int iterations = 0;
  bool converged = true;
};

ColumnSolve solve_column(const CrossbarInstance& instance, int col, const BitVector& active);

/// Parasitic-free, degeneration-free column currents.
Eigen::VectorXd ideal_currents(const CrossbarInstance& instance, const BitVector& input_bits,
                               const BitVector& row_mask);

/// Dense direct solve of the whole array at tol_v / 100. Test oracle; refuses
/// arrays with more than 256 logical cells.
SolveResult dense_reference_solve(const CrossbarInstance& instance, const BitVector& input_bits,
                                  const BitVector& row_mask);

/// Net current into every unknown node, evaluated with the nonlinear cell law
/// at the given voltages. Used for Kirchhoff checks.
struct KirchhoffCheck {
  double max_residual = 0.0;        // amperes
  double max_scaled_residual = 0.0;  // residual / (sum of incident conductances * tol_v)
};

KirchhoffCheck kirchhoff_residual(const CrossbarInstance& instance, const BitVector& input_bits,
                                  const BitVector& row_mask, const SolveResult& result);

/// Ideal ADC-side current of one output unit: the In=1/W=1 cell current,
/// less the HRS baseline when a dummy column cancels it.
double unit_current(const TechnologyProfile& profile, const CrossbarConfig& config);

BitVector effective_activation(const BitVector& input_bits, const BitVector& row_mask);

}  // namespace xbar
