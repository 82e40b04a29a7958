#include "doctest.h"

#include <cmath>
#include <random>
#include <stdexcept>

#include "support.hpp"
#include "xbar/characterize.hpp"
#include "xbar/crossbar.hpp"

using namespace xbar;
using xbar::testing::random_bits;
using xbar::testing::random_levels;
using xbar::testing::rel_diff;

namespace {

CrossbarConfig small_config(int rows, int cols) {
  CrossbarConfig c;
  c.rows = rows;
  c.cols = cols;
  c.dummy_column = false;
  return c;
}

TechnologyProfile ohmic(std::string name = "fefet") {
  auto p = builtin_profile(name);
  p.degeneration.alpha = 0.0;
  return p;
}

}  // namespace

TEST_CASE("build_crossbar maps levels to conductances") {
  const auto p = builtin_profile("fefet");
  auto cfg = small_config(64, 64);
  const auto zero = build_crossbar(p, cfg, Eigen::MatrixXi::Zero(64, 64), 1);
  CHECK((zero.g_input_high.array() == p.g_on / p.ratio_hrs).all());

  cfg = small_config(2, 2);
  Eigen::MatrixXi w(2, 2);
  w << 1, 0, 0, 1;
  const auto diag = build_crossbar(p, cfg, w, 1);
  CHECK(diag.g_input_high(0, 0) == p.g_on);
  CHECK(diag.g_input_high(1, 1) == p.g_on);
  CHECK(diag.g_input_high(0, 1) == p.g_on / p.ratio_hrs);
  CHECK(diag.g_input_high(1, 0) == p.g_on / p.ratio_hrs);
  CHECK((diag.g_input_low.array() == p.g_on / p.ratio_off).all());

  cfg = small_config(64, 64);
  cfg.dummy_column = true;
  const auto dummy = build_crossbar(p, cfg, Eigen::MatrixXi::Ones(64, 64), 1);
  CHECK(dummy.physical_cols() == 65);
  CHECK((dummy.levels.col(64).array() == 0).all());
  CHECK(dummy.segment_res == doctest::Approx(cfg.wire_res_per_gp * p.cell_height_gp));
}

TEST_CASE("build_crossbar rejects bad shapes and levels") {
  const auto p = builtin_profile("fefet");
  CHECK_THROWS_AS(build_crossbar(p, small_config(4, 4), Eigen::MatrixXi::Zero(4, 3), 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_crossbar(p, small_config(2, 2), Eigen::MatrixXi::Constant(2, 2, 2), 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_crossbar(builtin_profile("sram8t"), small_config(2, 2),
                                 Eigen::MatrixXi::Zero(2, 2), 2),
                  std::invalid_argument);
  CHECK_NOTHROW(build_crossbar(p, small_config(2, 2), Eigen::MatrixXi::Constant(2, 2, 3), 2));
}

TEST_CASE("single cell without parasitics") {
  auto cfg = small_config(1, 1);
  cfg = cfg.ideal();
  cfg.v_read = 0.1;
  const auto inst = build_crossbar(builtin_profile("fefet"), cfg, Eigen::MatrixXi::Ones(1, 1), 1);
  const auto res = solve(inst, BitVector::Ones(1), full_mask(1));
  CHECK(res.sl_currents[0] == doctest::Approx(5e-6));
  CHECK(res.iterations <= 2);
  CHECK(res.converged);
}

TEST_CASE("two-cell column against hand nodal analysis") {
  // Driver and sink ideal; one segment r between the rows on both lines.
  // Unknowns: drive node of row 1 (d1) and sense node of row 0 (s0).
  //   d1: (V - d1)/r = g1 d1            ->  d1 = V / (1 + g1 r)
  //   s0: g0 (V - s0) = s0 / r          ->  s0 = g0 V r / (1 + g0 r)
  //   I_sink = s0 / r + g1 d1
  const double r = 500.0;
  auto cfg = small_config(2, 1);
  cfg.driver_res = 0.0;
  cfg.sink_res = 0.0;
  cfg.wire_res_per_gp = r;  // fefet cell height is 1 GP
  Eigen::MatrixXi w(2, 1);
  w << 1, 0;
  const double v = cfg.v_read;

  SUBCASE("ohmic cells") {
    const auto p = ohmic();
    const auto inst = build_crossbar(p, cfg, w, 1);
    const double g0 = p.g_on, g1 = p.g_hrs();
    const double expected = g0 * v / (1 + g0 * r) + g1 * v / (1 + g1 * r);
    const auto res = solve(inst, BitVector::Ones(2), full_mask(2));
    CHECK(rel_diff(res.sl_currents[0], expected) < 1e-9);
    const auto ref = dense_reference_solve(inst, BitVector::Ones(2), full_mask(2));
    CHECK(rel_diff(ref.sl_currents[0], expected) < 1e-9);
  }

  SUBCASE("degenerating cell on the raised source node") {
    auto p = builtin_profile("fefet");
    p.degeneration = {0.3, 1.0};
    const auto inst = build_crossbar(p, cfg, w, 1);
    const double g0 = p.g_on, g1 = p.g_hrs();
    // s0 solves g0 * f(s0) * (V - s0) = s0 / r with f = 1 - s0 / v_sat; bisection.
    double lo = 0.0, hi = v;
    for (int k = 0; k < 200; ++k) {
      const double mid = 0.5 * (lo + hi);
      const double f = g0 * (1.0 - mid / 0.3) * (v - mid) - mid / r;
      (f > 0 ? lo : hi) = mid;
    }
    const double s0 = 0.5 * (lo + hi);
    const double expected = s0 / r + g1 * v / (1 + g1 * r);
    const auto res = solve(inst, BitVector::Ones(2), full_mask(2));
    CHECK(res.converged);
    CHECK(rel_diff(res.sl_currents[0], expected) < 1e-7);
    const auto ref = dense_reference_solve(inst, BitVector::Ones(2), full_mask(2));
    CHECK(rel_diff(ref.sl_currents[0], expected) < 1e-9);
  }
}

TEST_CASE("ideal limit reproduces the conductance sum exactly") {
  std::mt19937_64 rng(3);
  for (const auto& base : builtin_profiles()) {
    auto p = base;
    p.degeneration.alpha = 0.0;
    auto cfg = small_config(16, 8).ideal();
    cfg.dummy_column = true;
    const int levels = p.max_levels >= 4 ? 3 : 1;
    const auto inst = build_crossbar(p, cfg, random_levels(rng, 16, 8, levels), levels == 3 ? 2 : 1);
    for (int trial = 0; trial < 10; ++trial) {
      const BitVector in = random_bits(rng, 16);
      const BitVector mask = random_bits(rng, 16, 0.7);
      const auto res = solve(inst, in, mask);
      const auto ideal = ideal_currents(inst, in, mask);
      for (int j = 0; j < inst.physical_cols(); ++j) {
        double sum = 0.0;
        for (int i = 0; i < 16; ++i) {
          const int on = in[i] & mask[i];
          sum += cell_conductance(p, {on, inst.levels(i, j), inst.bit_slice}) * cfg.v_read;
        }
        CHECK(res.sl_currents[j] == sum);
        CHECK(ideal[j] == sum);
      }
    }
  }
}

TEST_CASE("ideal_currents examples") {
  const auto p = builtin_profile("fefet");
  auto cfg = small_config(16, 4);
  const auto ones = build_crossbar(p, cfg, Eigen::MatrixXi::Ones(16, 4), 1);
  auto all = ideal_currents(ones, BitVector::Ones(16), full_mask(16));
  CHECK(all[0] == doctest::Approx(16 * p.g_on * cfg.v_read));

  auto eight = ideal_currents(ones, BitVector::Ones(16), range_mask(16, 4, 12));
  CHECK(eight[2] == doctest::Approx(8 * p.g_on * cfg.v_read + 8 * p.g_off() * cfg.v_read));

  auto none = ideal_currents(ones, BitVector::Zero(16), full_mask(16));
  CHECK(none[1] == doctest::Approx(16 * p.g_off() * cfg.v_read));
}

TEST_CASE("iterative solve matches the dense MNA oracle") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> dim(1, 6);
  std::uniform_real_distribution<double> res(0.0, 40.0);
  const auto profiles = builtin_profiles();
  for (int trial = 0; trial < 40; ++trial) {
    const auto& p = profiles[trial % profiles.size()];
    CrossbarConfig cfg;
    cfg.rows = dim(rng);
    cfg.cols = dim(rng);
    cfg.wire_res_per_gp = trial % 5 == 0 ? 0.0 : res(rng);
    cfg.driver_res = trial % 7 == 0 ? 0.0 : 10 * res(rng);
    cfg.sink_res = trial % 3 == 0 ? 0.0 : 5 * res(rng);
    cfg.dummy_column = trial % 2 == 0;
    const auto inst = build_crossbar(p, cfg, random_levels(rng, cfg.rows, cfg.cols, 1), 1);
    const BitVector in = random_bits(rng, cfg.rows);
    const BitVector mask = random_bits(rng, cfg.rows, 0.8);
    const auto a = solve(inst, in, mask);
    const auto b = dense_reference_solve(inst, in, mask);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    for (int j = 0; j < inst.physical_cols(); ++j) CHECK(rel_diff(a.sl_currents[j], b.sl_currents[j]) < 1e-6);
  }
}

TEST_CASE("dense oracle refuses large arrays") {
  auto cfg = small_config(32, 16);
  const auto inst = build_crossbar(builtin_profile("fefet"), cfg, Eigen::MatrixXi::Zero(32, 16), 1);
  CHECK_THROWS_AS(dense_reference_solve(inst, BitVector::Ones(32), full_mask(32)), std::invalid_argument);
}

TEST_CASE("physical properties of the solved network") {
  std::mt19937_64 rng(23);
  for (const auto& p : builtin_profiles()) {
    CrossbarConfig cfg;
    cfg.rows = 32;
    cfg.cols = 6;
    const auto w = random_levels(rng, 32, 6, 1);
    const auto inst = build_crossbar(p, cfg, w, 1);
    for (int trial = 0; trial < 5; ++trial) {
      const BitVector in = random_bits(rng, 32, 0.6);
      const BitVector mask = full_mask(32);
      const auto res = solve(inst, in, mask);
      REQUIRE(res.converged);
      const auto ideal = ideal_currents(inst, in, mask);

      // Kirchhoff at every unknown node.
      const auto kcl = kirchhoff_residual(inst, in, mask, res);
      CHECK(kcl.max_scaled_residual < 1.0);

      for (int j = 0; j < inst.physical_cols(); ++j) {
        CHECK(res.sl_currents[j] >= 0.0);
        CHECK(res.sl_currents[j] <= ideal[j]);
      }

      // More wire resistance never adds current.
      auto worse_cfg = cfg;
      worse_cfg.wire_res_per_gp *= 3.0;
      const auto worse = solve(build_crossbar(p, worse_cfg, w, 1), in, mask);
      for (int j = 0; j < inst.physical_cols(); ++j) CHECK(worse.sl_currents[j] <= res.sl_currents[j] * (1 + 1e-12));

      // Activating one more row never removes current, provided an asserted HRS cell
      // conducts at least as much as an unselected one.
      if (p.ratio_hrs > p.ratio_off) continue;
      BitVector partial = mask;
      BitVector more = mask;
      partial.setZero();
      more.setZero();
      partial.head(10).setOnes();
      more.head(11).setOnes();
      const auto a = solve(inst, in, partial);
      const auto b = solve(inst, in, more);
      for (int j = 0; j < inst.physical_cols(); ++j) CHECK(b.sl_currents[j] >= a.sl_currents[j] * (1 - 1e-12));
    }
  }
}

TEST_CASE("asserting an HRS cell can lower current when R_HRS exceeds R_OFF") {
  // sram8t: R_HRS/R_ON = 3.5e6 > R_OFF/R_ON = 2.5e6, so In=1/W=0 conducts less than In=0.
  const auto p = builtin_profile("sram8t");
  CrossbarConfig cfg;
  cfg.rows = 4;
  cfg.cols = 1;
  cfg.dummy_column = false;
  const auto inst = build_crossbar(p, cfg, Eigen::MatrixXi::Zero(4, 1), 1);
  const auto before = solve(inst, BitVector::Ones(4), range_mask(4, 0, 2));
  const auto after = solve(inst, BitVector::Ones(4), range_mask(4, 0, 3));
  CHECK(after.sl_currents[0] < before.sl_currents[0]);
}

TEST_CASE("taller cells raise the all-ones non-ideality factor") {
  auto p = builtin_profile("fefet");
  CrossbarConfig cfg;
  cfg.rows = 64;
  cfg.cols = 2;
  double previous = -1.0;
  for (double height : {1.0, 1.5, 2.0, 3.0}) {
    p.cell_height_gp = height;
    const auto inst = build_crossbar(p, cfg, Eigen::MatrixXi::Ones(64, 2), 1);
    const auto res = solve(inst, BitVector::Ones(64), full_mask(64));
    const auto ideal = ideal_currents(inst, BitVector::Ones(64), full_mask(64));
    const double nf = *non_ideality_factor(ideal[0], res.sl_currents[0]);
    CHECK(nf > previous);
    previous = nf;
  }
}

TEST_CASE("iteration cap reports non-convergence with the last iterate") {
  auto p = builtin_profile("sram8t");
  CrossbarConfig cfg;
  cfg.rows = 64;
  cfg.cols = 1;
  cfg.max_iters = 1;
  const auto inst = build_crossbar(p, cfg, Eigen::MatrixXi::Ones(64, 1), 1);
  const auto res = solve(inst, BitVector::Ones(64), full_mask(64));
  CHECK_FALSE(res.converged);
  CHECK(res.iterations == 1);
  CHECK(res.sl_currents[0] > 0.0);
}

TEST_CASE("D-input drives unselected rows to ground") {
  auto p = ohmic();
  p.input_mode = InputMode::DInput;
  auto cfg = small_config(4, 1).ideal();
  const auto inst = build_crossbar(p, cfg, Eigen::MatrixXi::Ones(4, 1), 1);
  BitVector in(4);
  in << 1, 0, 1, 0;
  const auto res = solve(inst, in, full_mask(4));
  CHECK(res.sl_currents[0] == doctest::Approx(2 * p.g_on * cfg.v_read));
  CHECK(ideal_currents(inst, in, full_mask(4))[0] == res.sl_currents[0]);

  // With parasitics the grounded drains pull the sense line down.
  CrossbarConfig lossy = small_config(4, 1);
  const auto real = solve(build_crossbar(p, lossy, Eigen::MatrixXi::Ones(4, 1), 1), in, full_mask(4));
  CHECK(real.sl_currents[0] < res.sl_currents[0]);
  CHECK(real.converged);
}

TEST_CASE("solve validates activation shape") {
  const auto inst = build_crossbar(builtin_profile("fefet"), small_config(4, 2), Eigen::MatrixXi::Zero(4, 2), 1);
  CHECK_THROWS_AS(solve(inst, BitVector::Ones(3), full_mask(3)), std::invalid_argument);
  BitVector bad = BitVector::Ones(4);
  bad[1] = 2;
  CHECK_THROWS_AS(solve(inst, bad, full_mask(4)), std::invalid_argument);
}
