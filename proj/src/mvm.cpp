#include "xbar/mvm.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <string>

namespace xbar {

namespace {
int ceil_div(int a, int b) { return (a + b - 1) / b; }
}  // namespace

TileGrid decompose(const Eigen::MatrixXi& weights, int array_rows, int array_cols) {
  if (weights.rows() < 1 || weights.cols() < 1) throw std::invalid_argument("empty weight matrix");
  if (array_rows < 1 || array_cols < 1) throw std::invalid_argument("array dimensions must be >= 1");
  TileGrid g;
  g.matrix_rows = static_cast<int>(weights.rows());
  g.matrix_cols = static_cast<int>(weights.cols());
  g.array_rows = array_rows;
  g.array_cols = array_cols;
  g.row_tiles = ceil_div(g.matrix_rows, array_rows);
  g.col_tiles = ceil_div(g.matrix_cols, array_cols);
  g.tiles.reserve(static_cast<std::size_t>(g.row_tiles) * g.col_tiles);
  for (int rt = 0; rt < g.row_tiles; ++rt)
    for (int ct = 0; ct < g.col_tiles; ++ct) {
      Eigen::MatrixXi t = Eigen::MatrixXi::Zero(array_rows, array_cols);
      const int r0 = rt * array_rows;
      const int c0 = ct * array_cols;
      const int nr = std::min(array_rows, g.matrix_rows - r0);
      const int nc = std::min(array_cols, g.matrix_cols - c0);
      t.topLeftCorner(nr, nc) = weights.block(r0, c0, nr, nc);
      g.tiles.push_back(std::move(t));
    }
  return g;
}

Eigen::MatrixXi TileGrid::reassemble() const {
  Eigen::MatrixXi full(row_tiles * array_rows, col_tiles * array_cols);
  for (int rt = 0; rt < row_tiles; ++rt)
    for (int ct = 0; ct < col_tiles; ++ct)
      full.block(rt * array_rows, ct * array_cols, array_rows, array_cols) = tile(rt, ct);
  return full.topLeftCorner(matrix_rows, matrix_cols);
}

std::vector<Eigen::MatrixXi> bit_slice_weights(const Eigen::MatrixXi& weights, int weight_bits,
                                               int bit_slice) {
  if (bit_slice != 1 && bit_slice != 2) throw std::invalid_argument("bit slice must be 1 or 2");
  if (weight_bits < 1 || weight_bits > 30) throw std::invalid_argument("weight bits out of range");
  if (weights.size() > 0 && (weights.minCoeff() < 0 || weights.maxCoeff() >= (1 << weight_bits)))
    throw std::invalid_argument("weight outside [0, 2^" + std::to_string(weight_bits) + ")");
  const int slices = ceil_div(weight_bits, bit_slice);
  const int mask = (1 << bit_slice) - 1;
  std::vector<Eigen::MatrixXi> out;
  out.reserve(slices);
  for (int s = 0; s < slices; ++s)
    out.push_back(weights.unaryExpr([&](int w) { return (w >> (s * bit_slice)) & mask; }));
  return out;
}

std::vector<BitVector> encode_inputs(const Eigen::VectorXi& inputs, int input_bits) {
  if (input_bits < 1 || input_bits > 30) throw std::invalid_argument("input bits out of range");
  if (inputs.size() > 0 && (inputs.minCoeff() < 0 || inputs.maxCoeff() >= (1 << input_bits)))
    throw std::invalid_argument("input outside [0, 2^" + std::to_string(input_bits) + ")");
  std::vector<BitVector> planes;
  planes.reserve(input_bits);
  for (int b = 0; b < input_bits; ++b)
    planes.push_back(inputs.unaryExpr([b](int v) { return (v >> b) & 1; }));
  return planes;
}

std::vector<BitVector> schedule_pwa(int tile_rows, int pwa_group) {
  if (pwa_group < 1 || pwa_group > tile_rows)
    throw std::invalid_argument("PWA group must lie in [1, tile rows]");
  std::vector<BitVector> masks;
  for (int begin = 0; begin < tile_rows; begin += pwa_group)
    masks.push_back(range_mask(tile_rows, begin, std::min(tile_rows, begin + pwa_group)));
  return masks;
}

int MvmPlan::adc_states(int mask_index) const {
  return static_cast<int>(masks.at(mask_index).sum()) * ((1 << bit_slice) - 1) + 1;
}

MvmPlan make_plan(int matrix_rows, int matrix_cols, int array_rows, int array_cols,
                  int weight_bits, int input_bits, int bit_slice, int pwa_group) {
  if (matrix_rows < 1 || matrix_cols < 1) throw std::invalid_argument("empty matrix");
  if (bit_slice != 1 && bit_slice != 2) throw std::invalid_argument("bit slice must be 1 or 2");
  if (weight_bits < 1 || input_bits < 1) throw std::invalid_argument("precisions must be >= 1");
  MvmPlan p;
  p.matrix_rows = matrix_rows;
  p.matrix_cols = matrix_cols;
  p.array_rows = array_rows;
  p.array_cols = array_cols;
  p.row_tiles = ceil_div(matrix_rows, array_rows);
  p.col_tiles = ceil_div(matrix_cols, array_cols);
  p.weight_bits = weight_bits;
  p.input_bits = input_bits;
  p.bit_slice = bit_slice;
  p.slices = ceil_div(weight_bits, bit_slice);
  p.pwa_group = pwa_group;
  p.masks = schedule_pwa(array_rows, pwa_group);
  for (int rt = 0; rt < p.row_tiles; ++rt)
    for (int ct = 0; ct < p.col_tiles; ++ct)
      for (int s = 0; s < p.slices; ++s)
        for (int b = 0; b < input_bits; ++b)
          for (int m = 0; m < static_cast<int>(p.masks.size()); ++m)
            p.schedule.push_back({rt, ct, s, b, m, std::int64_t{1} << (s * bit_slice + b)});
  return p;
}

void write_plan_summary(std::ostream& os, const MvmPlan& p) {
  os << "matrix " << p.matrix_rows << "x" << p.matrix_cols << " on " << p.array_rows << "x"
     << p.array_cols << " arrays\n";
  os << "tiles " << p.row_tiles << "x" << p.col_tiles << ", slices " << p.slices << " (bit_slice "
     << p.bit_slice << ", weight_bits " << p.weight_bits << "), input_bits " << p.input_bits << "\n";
  os << "pwa_group " << p.pwa_group << " -> " << p.masks.size() << " activation windows\n";
  os << "cycles per mvm " << p.cycles_per_mvm() << "\n";
  for (std::size_t m = 0; m < p.masks.size(); ++m)
    os << "window " << m << ": adc states " << p.adc_states(static_cast<int>(m)) << "\n";
}

MvmHardware program_hardware(const MvmPlan& plan, const Eigen::MatrixXi& weights,
                             const TechnologyProfile& profile, const CrossbarConfig& array_config,
                             std::vector<AdcSpec> adcs) {
  if (weights.rows() != plan.matrix_rows || weights.cols() != plan.matrix_cols)
    throw std::invalid_argument("weight matrix does not match the plan");
  if (adcs.size() != plan.masks.size())
    throw std::invalid_argument("need one ADC ladder per activation window");
  for (std::size_t m = 0; m < adcs.size(); ++m)
    if (adcs[m].n_states() != plan.adc_states(static_cast<int>(m)))
      throw std::invalid_argument("ADC ladder " + std::to_string(m) + " has " +
                                  std::to_string(adcs[m].n_states()) + " states, window needs " +
                                  std::to_string(plan.adc_states(static_cast<int>(m))));
  CrossbarConfig cfg = array_config;
  cfg.rows = plan.array_rows;
  cfg.cols = plan.array_cols;
  MvmHardware hw;
  hw.plan = plan;
  hw.adcs = std::move(adcs);
  const TileGrid grid = decompose(weights, plan.array_rows, plan.array_cols);
  hw.arrays.reserve(grid.tiles.size() * plan.slices);
  for (const auto& tile : grid.tiles)
    for (auto& slice : bit_slice_weights(tile, plan.weight_bits, plan.bit_slice))
      hw.arrays.push_back(build_crossbar(profile, cfg, slice, plan.bit_slice));
  return hw;
}

MvmOutput execute_mvm(const MvmHardware& hw, const Eigen::VectorXi& inputs, bool keep_cycles) {
  const MvmPlan& p = hw.plan;
  if (inputs.size() != p.matrix_rows)
    throw std::invalid_argument("input vector length does not match the matrix rows");
  Eigen::VectorXi padded = Eigen::VectorXi::Zero(p.row_tiles * p.array_rows);
  padded.head(p.matrix_rows) = inputs;
  const std::vector<BitVector> planes = encode_inputs(padded, p.input_bits);

  MvmOutput out;
  out.values = IntVector::Zero(p.matrix_cols);
  auto& diag = out.diagnostics;
  for (const auto& step : p.schedule) {
    const BitVector bits = planes[step.input_bit].segment(step.row_tile * p.array_rows, p.array_rows);
    const BitVector& mask = p.masks[step.mask_index];
    const CrossbarInstance& inst = hw.array(step.row_tile, step.col_tile, step.slice);
    if (inst.has_dummy() && bits.cwiseProduct(mask).sum() == 0) continue;
    const SolveResult res = solve(inst, bits, mask);
    const Eigen::VectorXd ideal = ideal_currents(inst, bits, mask);
    const AdcSpec& adc = hw.adcs[step.mask_index];
    ++diag.executed_cycles;
    if (!res.converged) ++diag.unconverged_cycles;

    double cycle_nf = 0.0;
    for (int j = 0; j < p.array_cols; ++j) {
      if (auto nf = non_ideality_factor(ideal[j], res.sl_currents[j])) {
        cycle_nf = std::max(cycle_nf, *nf);
        diag.nf_sum += *nf;
        ++diag.nf_count;
      }
      const int col = step.col_tile * p.array_cols + j;
      if (col >= p.matrix_cols) continue;
      const double current = inst.has_dummy()
                                 ? dummy_subtract(res.sl_currents[j], res.sl_currents[inst.dummy_index()])
                                 : res.sl_currents[j];
      out.values[col] += step.weight * quantize(adc, current);
    }
    diag.max_nf = std::max(diag.max_nf, cycle_nf);
    if (keep_cycles) diag.cycles.push_back({step, res.sl_currents, ideal, cycle_nf, res.converged});
  }
  return out;
}

IntVector integer_mvm(const Eigen::MatrixXi& weights, const Eigen::VectorXi& inputs) {
  if (weights.rows() != inputs.size()) throw std::invalid_argument("dimension mismatch");
  return weights.cast<std::int64_t>().transpose() * inputs.cast<std::int64_t>();
}

Eigen::MatrixXi differential_split(const Eigen::MatrixXi& w) {
  Eigen::MatrixXi out(w.rows(), 2 * w.cols());
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    out.col(2 * j) = w.col(j).cwiseMax(0);
    out.col(2 * j + 1) = (-w.col(j)).cwiseMax(0);
  }
  return out;
}

IntVector differential_combine(const IntVector& physical) {
  if (physical.size() % 2 != 0) throw std::invalid_argument("differential vector has odd length");
  IntVector out(physical.size() / 2);
  for (Eigen::Index j = 0; j < out.size(); ++j) out[j] = physical[2 * j] - physical[2 * j + 1];
  return out;
}

}  // namespace xbar
