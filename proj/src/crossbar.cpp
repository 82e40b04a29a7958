#include "xbar/crossbar.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace xbar {

BitVector full_mask(int rows) { return BitVector::Ones(rows); }

BitVector range_mask(int rows, int begin, int end) {
  if (begin < 0 || end > rows || begin > end) throw std::invalid_argument("bad row range");
  BitVector m = BitVector::Zero(rows);
  m.segment(begin, end - begin).setOnes();
  return m;
}

BitVector effective_activation(const BitVector& input_bits, const BitVector& row_mask) {
  if (input_bits.size() != row_mask.size())
    throw std::invalid_argument("input bits and row mask differ in length");
  BitVector out(input_bits.size());
  for (Eigen::Index i = 0; i < input_bits.size(); ++i) {
    if ((input_bits[i] != 0 && input_bits[i] != 1) || (row_mask[i] != 0 && row_mask[i] != 1))
      throw std::invalid_argument("input bits and row masks must be 0/1");
    out[i] = input_bits[i] & row_mask[i];
  }
  return out;
}

void CrossbarConfig::validate() const {
  if (rows < 1 || cols < 1) throw std::invalid_argument("crossbar needs at least one row and column");
  if (wire_res_per_gp < 0 || driver_res < 0 || sink_res < 0)
    throw std::invalid_argument("parasitic resistances must be >= 0");
  if (!(v_read > 0)) throw std::invalid_argument("v_read must be > 0");
  if (!(tol_v > 0)) throw std::invalid_argument("tol_v must be > 0");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
}

CrossbarConfig CrossbarConfig::ideal() const {
  CrossbarConfig c = *this;
  c.wire_res_per_gp = 0.0;
  c.driver_res = 0.0;
  c.sink_res = 0.0;
  return c;
}

double unit_current(const TechnologyProfile& profile, const CrossbarConfig& config) {
  const double g = config.dummy_column ? profile.g_on - profile.g_hrs() : profile.g_on;
  return g * config.v_read;
}

CrossbarInstance build_crossbar(const TechnologyProfile& profile, const CrossbarConfig& config,
                                const Eigen::MatrixXi& weights, int bit_slice) {
  profile.validate();
  config.validate();
  if (weights.rows() != config.rows || weights.cols() != config.cols)
    throw std::invalid_argument("weight matrix is " + std::to_string(weights.rows()) + "x" +
                                std::to_string(weights.cols()) + ", crossbar is " +
                                std::to_string(config.rows) + "x" + std::to_string(config.cols));
  if (bit_slice != 1 && bit_slice != 2) throw std::invalid_argument("bit slice must be 1 or 2");
  if (bit_slice == 2 && profile.max_levels < 4)
    throw std::invalid_argument("profile " + profile.name + " cannot store 2 bits per cell");
  const int max_level = std::min((1 << bit_slice), profile.max_levels) - 1;
  if (weights.size() > 0 && (weights.minCoeff() < 0 || weights.maxCoeff() > max_level))
    throw std::invalid_argument("weight level outside [0, " + std::to_string(max_level) + "]");

  CrossbarInstance inst;
  inst.config = config;
  inst.profile = profile;
  inst.bit_slice = bit_slice;
  inst.segment_res = config.wire_res_per_gp * profile.cell_height_gp;
  const int physical = config.cols + (config.dummy_column ? 1 : 0);
  inst.levels = Eigen::MatrixXi::Zero(config.rows, physical);
  inst.levels.leftCols(config.cols) = weights;
  inst.g_input_high.resize(config.rows, physical);
  inst.g_input_low.resize(config.rows, physical);
  const bool d_input = profile.input_mode == InputMode::DInput;
  for (int j = 0; j < physical; ++j) {
    for (int i = 0; i < config.rows; ++i) {
      const int level = inst.levels(i, j);
      inst.g_input_high(i, j) = level_conductance(profile, level);
      // D-input keeps the gate on and drives the drain to 0 V for In=0.
      inst.g_input_low(i, j) = d_input ? level_conductance(profile, level) : profile.g_off();
    }
  }
  return inst;
}

namespace {

// Relative change in the column current below which it counts as settled.
constexpr double kCurrentRelTol = 1e-8;

// A node reference is either an unknown index or a pinned potential.
struct Terminal {
  int node = -1;
  double fixed = 0.0;
  bool is_fixed() const { return node < 0; }
};

struct Branch {
  Terminal a, b;
  double g = 0.0;
};

// Topology of one column: identical for every column of an instance.
struct ColumnNetwork {
  int unknowns = 0;
  std::vector<Terminal> drive;  // per row
  std::vector<Terminal> sense;  // per row
  std::vector<Branch> wires;    // driver, segments, sink
  Terminal sense_bottom;
  double sink_g = 0.0;  // 0 means the bottom sense node is grounded directly
  Terminal ground;      // fixed 0 V (drive terminal of D-input cells at In=0)
};

ColumnNetwork build_network(const CrossbarInstance& inst) {
  const auto& cfg = inst.config;
  const int rows = inst.rows();
  const double seg = inst.segment_res;
  ColumnNetwork net;
  net.drive.resize(rows);
  net.sense.resize(rows);
  net.ground = Terminal{-1, 0.0};
  const Terminal source{-1, cfg.v_read};

  auto fresh = [&net]() { return Terminal{net.unknowns++, 0.0}; };

  if (seg > 0.0) {
    // Interleave drive/sense nodes row by row so the system stays banded.
    for (int i = 0; i < rows; ++i) {
      net.drive[i] = (i == 0 && cfg.driver_res == 0.0) ? source : fresh();
      net.sense[i] = (i == rows - 1 && cfg.sink_res == 0.0) ? net.ground : fresh();
    }
    for (int i = 0; i + 1 < rows; ++i) {
      net.wires.push_back({net.drive[i], net.drive[i + 1], 1.0 / seg});
      net.wires.push_back({net.sense[i], net.sense[i + 1], 1.0 / seg});
    }
  } else {
    const Terminal d = cfg.driver_res == 0.0 ? source : fresh();
    const Terminal s = cfg.sink_res == 0.0 ? net.ground : fresh();
    std::fill(net.drive.begin(), net.drive.end(), d);
    std::fill(net.sense.begin(), net.sense.end(), s);
  }
  if (cfg.driver_res > 0.0) net.wires.push_back({source, net.drive[0], 1.0 / cfg.driver_res});
  net.sense_bottom = net.sense[rows - 1];
  if (cfg.sink_res > 0.0) {
    net.sink_g = 1.0 / cfg.sink_res;
    net.wires.push_back({net.sense_bottom, net.ground, net.sink_g});
  }
  return net;
}

double potential(const Terminal& t, const Eigen::VectorXd& v) {
  return t.is_fixed() ? t.fixed : v[t.node];
}

// Symmetric pentadiagonal matrix (the interleaved drive/sense order never
// couples nodes more than two apart) with an in-place LDL^T solve.
class BandedSystem {
 public:
  void reset(int n) {
    d_.assign(n, 0.0);
    l1_.assign(n, 0.0);
    l2_.assign(n, 0.0);
  }
  void reset(const BandedSystem& base) {
    d_ = base.d_;
    l1_ = base.l1_;
    l2_ = base.l2_;
  }
  void add_diagonal(int r, double g) { d_[r] += g; }
  void add_coupling(int r, int c, double g) {
    if (r < c) std::swap(r, c);
    (r - c == 1 ? l1_ : l2_)[c] += g;
  }
  void solve_in_place(Eigen::VectorXd& x) {
    const int n = static_cast<int>(d_.size());
    for (int j = 0; j < n; ++j) {
      double d = d_[j];
      if (j >= 1) d -= l1_[j - 1] * l1_[j - 1] * d_[j - 1];
      if (j >= 2) d -= l2_[j - 2] * l2_[j - 2] * d_[j - 2];
      if (!(d > 0.0)) throw std::runtime_error("nodal matrix factorization failed");
      d_[j] = d;
      if (j + 1 < n) l1_[j] = (l1_[j] - (j >= 1 ? l2_[j - 1] * l1_[j - 1] * d_[j - 1] : 0.0)) / d;
      if (j + 2 < n) l2_[j] /= d;
    }
    for (int i = 1; i < n; ++i) {
      x[i] -= l1_[i - 1] * x[i - 1];
      if (i >= 2) x[i] -= l2_[i - 2] * x[i - 2];
    }
    for (int i = 0; i < n; ++i) x[i] /= d_[i];
    for (int i = n - 2; i >= 0; --i) {
      x[i] -= l1_[i] * x[i + 1];
      if (i + 2 < n) x[i] -= l2_[i] * x[i + 2];
    }
  }

 private:
  std::vector<double> d_, l1_, l2_;  // diagonal, first and second sub-diagonal
};

// Solves single columns of one instance. Each column starts from the previous
// column's node voltages, which are usually close.
class ColumnSolver {
 public:
  explicit ColumnSolver(const CrossbarInstance& inst) : inst_(inst), net_(build_network(inst)) {
    auto span = [](const Terminal& a, const Terminal& b) {
      return a.is_fixed() || b.is_fixed() ? 0 : std::abs(a.node - b.node);
    };
    int kd = 0;
    for (const auto& w : net_.wires) kd = std::max(kd, span(w.a, w.b));
    for (int i = 0; i < inst.rows(); ++i) kd = std::max(kd, span(net_.drive[i], net_.sense[i]));
    if (kd > 2) throw std::logic_error("column network is not pentadiagonal");
    warm_ = Eigen::VectorXd::Zero(net_.unknowns);
    // Wires do not change between iterations or columns.
    wire_system_.reset(net_.unknowns);
    wire_rhs_ = Eigen::VectorXd::Zero(net_.unknowns);
    for (const auto& w : net_.wires) stamp(wire_system_, wire_rhs_, w.a, w.b, w.g);
  }

  ColumnSolve run(int col, const BitVector& active) {
    const int rows = inst_.rows();
    const auto& deg = inst_.profile.degeneration;
    const bool d_input = inst_.profile.input_mode == InputMode::DInput;

    std::vector<Terminal> cell_drive(rows);
    std::vector<double> g_cell(rows);
    for (int i = 0; i < rows; ++i) {
      const bool on = active[i] != 0;
      g_cell[i] = on ? inst_.g_input_high(i, col) : inst_.g_input_low(i, col);
      cell_drive[i] = (d_input && !on) ? net_.ground : net_.drive[i];
    }

    const int n = net_.unknowns;
    Eigen::VectorXd v = warm_;
    std::vector<double> g_eff(rows);
    for (int i = 0; i < rows; ++i)
      g_eff[i] = series_conductance(deg, g_cell[i], potential(net_.sense[i], v));

    ColumnSolve out;
    out.converged = true;
    out.iterations = 1;
    if (n > 0) {
      out.converged = false;
      Eigen::VectorXd prev_delta;
      double i_prev = sink_current(cell_drive, g_cell, v);
      for (int iter = 1; iter <= inst_.config.max_iters; ++iter) {
        out.iterations = iter;
        Eigen::VectorXd next = linear_solve(cell_drive, g_eff);
        Eigen::VectorXd delta = next - v;
        v = std::move(next);
        // Lightly loaded columns sit at tiny sense voltages, where an absolute
        // voltage tolerance alone leaves a visible relative current error.
        const double i_now = sink_current(cell_drive, g_cell, v);
        const bool current_settled = std::abs(i_now - i_prev) <= kCurrentRelTol * std::abs(i_now);
        i_prev = i_now;
        if (delta.lpNorm<Eigen::Infinity>() < inst_.config.tol_v && current_settled) {
          out.converged = true;
          break;
        }
        const bool oscillating = prev_delta.size() == n && delta.dot(prev_delta) < 0.0;
        for (int i = 0; i < rows; ++i) {
          const double g_new = series_conductance(deg, g_cell[i], potential(net_.sense[i], v));
          g_eff[i] = oscillating ? 0.5 * (g_eff[i] + g_new) : g_new;
        }
        prev_delta = std::move(delta);
      }
      warm_ = v;
    }

    out.drive_voltages.resize(rows);
    out.sense_voltages.resize(rows);
    for (int i = 0; i < rows; ++i) {
      out.drive_voltages[i] = potential(net_.drive[i], v);
      out.sense_voltages[i] = potential(net_.sense[i], v);
    }
    out.sl_current = sink_current(cell_drive, g_cell, v);
    return out;
  }

  const ColumnNetwork& network() const { return net_; }

 private:
  // Nodal stamps of one branch into `sys` and `rhs`.
  static void stamp(BandedSystem& sys, Eigen::VectorXd& rhs, const Terminal& a, const Terminal& b,
                    double g) {
    if (!a.is_fixed()) {
      sys.add_diagonal(a.node, g);
      if (b.is_fixed())
        rhs[a.node] += g * b.fixed;
      else
        sys.add_coupling(a.node, b.node, -g);
    }
    if (!b.is_fixed()) {
      sys.add_diagonal(b.node, g);
      if (a.is_fixed()) rhs[b.node] += g * a.fixed;
    }
  }

  Eigen::VectorXd linear_solve(const std::vector<Terminal>& cell_drive,
                               const std::vector<double>& g_eff) {
    system_.reset(wire_system_);
    Eigen::VectorXd rhs = wire_rhs_;
    for (std::size_t i = 0; i < g_eff.size(); ++i)
      stamp(system_, rhs, cell_drive[i], net_.sense[i], g_eff[i]);
    system_.solve_in_place(rhs);
    return rhs;
  }

  double sink_current(const std::vector<Terminal>& cell_drive, const std::vector<double>& g_cell,
                      const Eigen::VectorXd& v) const {
    if (net_.sink_g > 0.0) return net_.sink_g * potential(net_.sense_bottom, v);
    // Grounded bottom node: sum everything flowing into it.
    const auto& deg = inst_.profile.degeneration;
    const Terminal& bottom = net_.sense_bottom;
    auto same = [](const Terminal& x, const Terminal& y) {
      return x.is_fixed() ? (y.is_fixed() && x.fixed == y.fixed) : x.node == y.node;
    };
    double total = 0.0;
    for (std::size_t i = 0; i < g_cell.size(); ++i) {
      if (!same(net_.sense[i], bottom)) continue;
      const double vs = potential(net_.sense[i], v);
      total += series_conductance(deg, g_cell[i], vs) * (potential(cell_drive[i], v) - vs);
    }
    for (const auto& w : net_.wires) {
      if (same(w.b, bottom) && !same(w.a, bottom))
        total += w.g * (potential(w.a, v) - potential(w.b, v));
      else if (same(w.a, bottom) && !same(w.b, bottom))
        total += w.g * (potential(w.b, v) - potential(w.a, v));
    }
    return total;
  }

  const CrossbarInstance& inst_;
  ColumnNetwork net_;
  BandedSystem wire_system_, system_;
  Eigen::VectorXd wire_rhs_, warm_;
};

void check_activation(const CrossbarInstance& inst, const BitVector& bits) {
  if (bits.size() != inst.rows())
    throw std::invalid_argument("activation has " + std::to_string(bits.size()) +
                                " rows, crossbar has " + std::to_string(inst.rows()));
}

}  // namespace

ColumnSolve solve_column(const CrossbarInstance& instance, int col, const BitVector& active) {
  check_activation(instance, active);
  if (col < 0 || col >= instance.physical_cols()) throw std::out_of_range("column index");
  ColumnSolver solver(instance);
  return solver.run(col, active);
}

SolveResult solve(const CrossbarInstance& instance, const BitVector& input_bits,
                  const BitVector& row_mask) {
  check_activation(instance, input_bits);
  const BitVector active = effective_activation(input_bits, row_mask);
  const int rows = instance.rows();
  const int cols = instance.physical_cols();
  SolveResult res;
  res.sl_currents.resize(cols);
  res.drive_voltages.resize(rows, cols);
  res.sense_voltages.resize(rows, cols);
  res.iterations = 0;
  res.converged = true;
  ColumnSolver solver(instance);
  // Columns that present the same conductances to the same activation are the
  // same circuit (padding columns, the dummy, all-zero columns): solve once.
  std::map<std::vector<double>, int> solved;
  std::vector<double> key(rows);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i)
      key[i] = active[i] ? instance.g_input_high(i, j) : instance.g_input_low(i, j);
    const auto [it, fresh] = solved.try_emplace(key, j);
    if (!fresh) {
      const int src = it->second;
      res.sl_currents[j] = res.sl_currents[src];
      res.drive_voltages.col(j) = res.drive_voltages.col(src);
      res.sense_voltages.col(j) = res.sense_voltages.col(src);
      continue;
    }
    ColumnSolve c = solver.run(j, active);
    res.sl_currents[j] = c.sl_current;
    res.drive_voltages.col(j) = c.drive_voltages;
    res.sense_voltages.col(j) = c.sense_voltages;
    res.iterations = std::max(res.iterations, c.iterations);
    res.converged = res.converged && c.converged;
  }
  return res;
}

Eigen::VectorXd ideal_currents(const CrossbarInstance& instance, const BitVector& input_bits,
                               const BitVector& row_mask) {
  check_activation(instance, input_bits);
  const BitVector active = effective_activation(input_bits, row_mask);
  const bool d_input = instance.profile.input_mode == InputMode::DInput;
  const double v = instance.config.v_read;
  Eigen::VectorXd out(instance.physical_cols());
  for (int j = 0; j < instance.physical_cols(); ++j) {
    double total = 0.0;
    for (int i = 0; i < instance.rows(); ++i) {
      if (active[i])
        total += instance.g_input_high(i, j) * v;
      else if (!d_input)
        total += instance.g_input_low(i, j) * v;
    }
    out[j] = total;
  }
  return out;
}

// Modified nodal analysis over the whole array: every physical node is an
// unknown, zero-ohm elements become 0 V sources with their own current
// unknowns, and the read supply is an explicit voltage source.
SolveResult dense_reference_solve(const CrossbarInstance& instance, const BitVector& input_bits,
                                  const BitVector& row_mask) {
  check_activation(instance, input_bits);
  const auto& cfg = instance.config;
  if (static_cast<long>(cfg.rows) * cfg.cols > 256)
    throw std::invalid_argument("dense reference solve is limited to 256 cells");
  const BitVector active = effective_activation(input_bits, row_mask);
  const int rows = instance.rows();
  const int cols = instance.physical_cols();
  const auto& deg = instance.profile.degeneration;
  const bool d_input = instance.profile.input_mode == InputMode::DInput;
  const double seg = instance.segment_res;

  // Node ids: 0 = ground (eliminated), 1 = supply, then drive/sense per cell.
  auto drive_node = [&](int i, int j) { return 2 + j * 2 * rows + i; };
  auto sense_node = [&](int i, int j) { return 2 + j * 2 * rows + rows + i; };
  const int nodes = 2 + 2 * rows * cols;

  struct Element {
    int a, b;
    double r;
    int sink_col = -1;  // >= 0 marks the sink branch of that column
  };
  std::vector<Element> resistors;
  for (int j = 0; j < cols; ++j) {
    resistors.push_back({1, drive_node(0, j), cfg.driver_res});
    for (int i = 0; i + 1 < rows; ++i) {
      resistors.push_back({drive_node(i, j), drive_node(i + 1, j), seg});
      resistors.push_back({sense_node(i, j), sense_node(i + 1, j), seg});
    }
    resistors.push_back({sense_node(rows - 1, j), 0, cfg.sink_res, j});
  }
  // Zero-ohm elements and the supply each add one branch-current unknown.
  std::vector<int> source_branch(resistors.size(), -1);
  int extra = 1;  // supply
  for (std::size_t k = 0; k < resistors.size(); ++k)
    if (resistors[k].r == 0.0) source_branch[k] = extra++;
  const int unknowns = (nodes - 1) + extra;
  auto vidx = [](int node) { return node - 1; };
  const int branch_base = nodes - 1;

  Eigen::MatrixXd g_cell(rows, cols);
  std::vector<std::vector<int>> cell_drive(cols, std::vector<int>(rows));
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) {
      const bool on = active[i] != 0;
      g_cell(i, j) = on ? instance.g_input_high(i, j) : instance.g_input_low(i, j);
      cell_drive[j][i] = (d_input && !on) ? 0 : drive_node(i, j);
    }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(unknowns);
  auto node_v = [&](const Eigen::VectorXd& s, int node) { return node == 0 ? 0.0 : s[vidx(node)]; };
  Eigen::MatrixXd g_eff(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) g_eff(i, j) = series_conductance(deg, g_cell(i, j), 0.0);

  const double tol = cfg.tol_v / 100.0;
  const int max_iters = std::max(cfg.max_iters, 1) * 10;
  SolveResult res;
  res.converged = false;
  Eigen::VectorXd prev_delta;
  for (int iter = 1; iter <= max_iters; ++iter) {
    res.iterations = iter;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(unknowns, unknowns);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(unknowns);
    auto conductance = [&](int p, int q, double g) {
      if (p != 0) a(vidx(p), vidx(p)) += g;
      if (q != 0) a(vidx(q), vidx(q)) += g;
      if (p != 0 && q != 0) {
        a(vidx(p), vidx(q)) -= g;
        a(vidx(q), vidx(p)) -= g;
      }
    };
    auto vsource = [&](int p, int q, int branch, double volts) {
      const int k = branch_base + branch;
      if (p != 0) {
        a(vidx(p), k) += 1.0;
        a(k, vidx(p)) += 1.0;
      }
      if (q != 0) {
        a(vidx(q), k) -= 1.0;
        a(k, vidx(q)) -= 1.0;
      }
      z[k] = volts;
    };
    vsource(1, 0, 0, cfg.v_read);
    for (std::size_t k = 0; k < resistors.size(); ++k) {
      const auto& e = resistors[k];
      if (source_branch[k] >= 0)
        vsource(e.a, e.b, source_branch[k], 0.0);
      else
        conductance(e.a, e.b, 1.0 / e.r);
    }
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) conductance(cell_drive[j][i], sense_node(i, j), g_eff(i, j));

    Eigen::VectorXd next = a.partialPivLu().solve(z);
    Eigen::VectorXd delta = (next - x).head(nodes - 1);
    x = std::move(next);
    if (delta.lpNorm<Eigen::Infinity>() < tol) {
      res.converged = true;
      break;
    }
    const bool oscillating = prev_delta.size() == delta.size() && delta.dot(prev_delta) < 0.0;
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) {
        const double g_new = series_conductance(deg, g_cell(i, j), node_v(x, sense_node(i, j)));
        g_eff(i, j) = oscillating ? 0.5 * (g_eff(i, j) + g_new) : g_new;
      }
    prev_delta = std::move(delta);
  }

  res.sl_currents.resize(cols);
  res.drive_voltages.resize(rows, cols);
  res.sense_voltages.resize(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) {
      res.drive_voltages(i, j) = node_v(x, drive_node(i, j));
      res.sense_voltages(i, j) = node_v(x, sense_node(i, j));
    }
  for (std::size_t k = 0; k < resistors.size(); ++k) {
    const auto& e = resistors[k];
    if (e.sink_col < 0) continue;
    // MNA branch current flows from a to b through the source.
    res.sl_currents[e.sink_col] = source_branch[k] >= 0
                                      ? x[branch_base + source_branch[k]]
                                      : node_v(x, e.a) / e.r;
  }
  return res;
}

KirchhoffCheck kirchhoff_residual(const CrossbarInstance& instance, const BitVector& input_bits,
                                  const BitVector& row_mask, const SolveResult& result) {
  const BitVector active = effective_activation(input_bits, row_mask);
  const ColumnNetwork net = build_network(instance);
  const auto& deg = instance.profile.degeneration;
  const bool d_input = instance.profile.input_mode == InputMode::DInput;
  const int rows = instance.rows();
  KirchhoffCheck check;
  for (int j = 0; j < instance.physical_cols(); ++j) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(net.unknowns);
    for (int i = 0; i < rows; ++i) {
      if (!net.drive[i].is_fixed()) v[net.drive[i].node] = result.drive_voltages(i, j);
      if (!net.sense[i].is_fixed()) v[net.sense[i].node] = result.sense_voltages(i, j);
    }
    Eigen::VectorXd net_in = Eigen::VectorXd::Zero(net.unknowns);
    Eigen::VectorXd g_sum = Eigen::VectorXd::Zero(net.unknowns);
    auto flow = [&](const Terminal& a, const Terminal& b, double g, double i_ab) {
      if (!a.is_fixed()) {
        net_in[a.node] -= i_ab;
        g_sum[a.node] += g;
      }
      if (!b.is_fixed()) {
        net_in[b.node] += i_ab;
        g_sum[b.node] += g;
      }
    };
    for (const auto& w : net.wires) flow(w.a, w.b, w.g, w.g * (potential(w.a, v) - potential(w.b, v)));
    for (int i = 0; i < rows; ++i) {
      const bool on = active[i] != 0;
      const double g = on ? instance.g_input_high(i, j) : instance.g_input_low(i, j);
      const Terminal drive = (d_input && !on) ? net.ground : net.drive[i];
      const double vs = potential(net.sense[i], v);
      const double ge = series_conductance(deg, g, vs);
      flow(drive, net.sense[i], ge, ge * (potential(drive, v) - vs));
    }
    for (int k = 0; k < net.unknowns; ++k) {
      const double r = std::abs(net_in[k]);
      check.max_residual = std::max(check.max_residual, r);
      check.max_scaled_residual =
          std::max(check.max_scaled_residual, r / (g_sum[k] * instance.config.tol_v));
    }
  }
  return check;
}

}  // namespace xbar
