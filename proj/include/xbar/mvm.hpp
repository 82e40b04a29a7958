#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "xbar/adc.hpp"
#include "xbar/crossbar.hpp"

namespace xbar {

using IntVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

/// A weight matrix cut into array-sized, zero-padded sub-matrices.
struct TileGrid {
  int matrix_rows = 0;
  int matrix_cols = 0;
  int array_rows = 0;
  int array_cols = 0;
  int row_tiles = 0;
  int col_tiles = 0;
  std::vector<Eigen::MatrixXi> tiles;  // row-major over (row_tile, col_tile)

  const Eigen::MatrixXi& tile(int rt, int ct) const { return tiles[rt * col_tiles + ct]; }
  Eigen::MatrixXi reassemble() const;
};

TileGrid decompose(const Eigen::MatrixXi& weights, int array_rows, int array_cols);

/// Weight bits grouped `bit_slice` at a time, least significant slice first.
std::vector<Eigen::MatrixXi> bit_slice_weights(const Eigen::MatrixXi& weights, int weight_bits,
                                               int bit_slice);

/// Input bit planes, least significant first.
std::vector<BitVector> encode_inputs(const Eigen::VectorXi& inputs, int input_bits);

/// Contiguous, disjoint activation windows covering every tile row.
std::vector<BitVector> schedule_pwa(int tile_rows, int pwa_group);

struct CycleStep {
  int row_tile = 0;
  int col_tile = 0;
  int slice = 0;
  int input_bit = 0;
  int mask_index = 0;
  std::int64_t weight = 1;  // 2^(slice * bit_slice + input_bit)
};

struct MvmPlan {
  int matrix_rows = 0;
  int matrix_cols = 0;
  int array_rows = 0;
  int array_cols = 0;
  int row_tiles = 0;
  int col_tiles = 0;
  int weight_bits = 1;
  int input_bits = 1;
  int bit_slice = 1;
  int slices = 1;
  int pwa_group = 1;
  std::vector<BitVector> masks;
  std::vector<CycleStep> schedule;

  int cycles_per_mvm() const { return static_cast<int>(schedule.size()); }
  int adc_states(int mask_index) const;
};

MvmPlan make_plan(int matrix_rows, int matrix_cols, int array_rows, int array_cols,
                  int weight_bits, int input_bits, int bit_slice, int pwa_group);

void write_plan_summary(std::ostream& os, const MvmPlan& plan);

/// Programmed hardware for one unsigned weight matrix: one crossbar per
/// (row tile, col tile, slice) and one ADC ladder per activation window.
struct MvmHardware {
  MvmPlan plan;
  std::vector<CrossbarInstance> arrays;  // index (rt * col_tiles + ct) * slices + s
  std::vector<AdcSpec> adcs;             // per mask index

  const CrossbarInstance& array(int rt, int ct, int s) const {
    return arrays[(rt * plan.col_tiles + ct) * plan.slices + s];
  }
};

MvmHardware program_hardware(const MvmPlan& plan, const Eigen::MatrixXi& weights,
                             const TechnologyProfile& profile, const CrossbarConfig& array_config,
                             std::vector<AdcSpec> adcs);

struct CycleDiagnostics {
  CycleStep step;
  Eigen::VectorXd raw_currents;    // physical columns of the array
  Eigen::VectorXd ideal_currents;
  double max_nf = 0.0;
  bool converged = true;
};

struct MvmDiagnostics {
  std::vector<CycleDiagnostics> cycles;  // only filled when requested
  double max_nf = 0.0;
  double nf_sum = 0.0;
  std::int64_t nf_count = 0;
  int unconverged_cycles = 0;
  int executed_cycles = 0;
};

struct MvmOutput {
  IntVector values;
  MvmDiagnostics diagnostics;
};

/// Runs every cycle: solve, dummy-subtract, quantize, then shift-add into
/// per-column accumulators. On arrays with a dummy column, all-zero activation
/// windows are skipped: column and dummy currents are then identical.
MvmOutput execute_mvm(const MvmHardware& hw, const Eigen::VectorXi& inputs,
                      bool keep_cycles = false);

/// Reference result, plain integer arithmetic: weights^T * inputs.
IntVector integer_mvm(const Eigen::MatrixXi& weights, const Eigen::VectorXi& inputs);

/// Signed weights as adjacent (positive, negative) magnitude columns.
Eigen::MatrixXi differential_split(const Eigen::MatrixXi& signed_weights);
IntVector differential_combine(const IntVector& physical);

}  // namespace xbar
