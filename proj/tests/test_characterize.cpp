#include "doctest.h"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "xbar/adc.hpp"
#include "xbar/characterize.hpp"

using namespace xbar;

namespace {

CharacterizationSpec spec_for(const std::string& tech, int rows, int n_per_state = 40) {
  CharacterizationSpec s;
  s.profile = builtin_profile(tech);
  s.config.rows = rows;
  s.config.cols = rows;
  s.sampler.n_per_state = n_per_state;
  s.sampler.seed = 7;
  return s;
}

std::string serialize(const CharacterizationTable& t) {
  std::ostringstream os;
  write_table(os, t);
  return os.str();
}

}  // namespace

TEST_CASE("non-ideality factor") {
  CHECK(*non_ideality_factor(100e-6, 90e-6) == doctest::Approx(0.1));
  CHECK(*non_ideality_factor(100e-6, 100e-6) == 0.0);
  CHECK_FALSE(non_ideality_factor(0.0, 1e-6).has_value());
  CHECK(*non_ideality_factor(50e-6, 60e-6) == doctest::Approx(0.2));
}

TEST_CASE("sense margin from a table") {
  CharacterizationTable t;
  t.states = {{0.0, 1e-6, 3}, {40e-6, 40e-6, 1}, {50e-6, 55e-6, 2}, {0, 0, 0}};
  CHECK(*sense_margin(t, 2) == doctest::Approx(5e-6));
  t.states[1] = {30e-6, 50e-6, 2};
  t.states[2] = {40e-6, 60e-6, 2};
  CHECK(*sense_margin(t, 2) == doctest::Approx(-5e-6));
  CHECK_FALSE(sense_margin(t, 3).has_value());
  CHECK_FALSE(sense_margin(t, 0).has_value());

  const auto rep = summarize(t, {0.1, 0.3, 0.2});
  CHECK(rep.first_negative_state == 2);
  CHECK(rep.max_nf == doctest::Approx(0.3));
  CHECK_FALSE(rep.sense_margins[0].has_value());
}

TEST_CASE("exhaustive 4x1 table at zero parasitics matches brute-force enumeration") {
  auto spec = spec_for("fefet", 4);
  spec.config = spec.config.ideal();
  spec.config.dummy_column = false;
  spec.profile.degeneration.alpha = 0.0;
  const auto& p = spec.profile;
  const double v = spec.config.v_read;

  // Independent enumeration over 2^4 inputs x 2^4 weights with the ideal sum.
  std::vector<double> lo(5, 1e9), hi(5, -1e9);
  for (int in = 0; in < 16; ++in)
    for (int w = 0; w < 16; ++w) {
      double current = 0.0;
      int state = 0;
      for (int r = 0; r < 4; ++r) {
        const int a = (in >> r) & 1, b = (w >> r) & 1;
        state += a * b;
        current += (a == 0 ? p.g_on / p.ratio_off : (b ? p.g_on : p.g_on / p.ratio_hrs)) * v;
      }
      lo[state] = std::min(lo[state], current);
      hi[state] = std::max(hi[state], current);
    }

  const auto table = build_table(spec, enumerate_states(spec));
  REQUIRE(table.x_max() == 4);
  for (int x = 0; x <= 4; ++x) {
    CHECK(table.states[x].i_min == doctest::Approx(lo[x]).epsilon(1e-12));
    CHECK(table.states[x].i_max == doctest::Approx(hi[x]).epsilon(1e-12));
  }
  // Closed form: SM_x = g_on v / 2 - (leak spread) / 2, where the non-contributing
  // rows swing between all-min and all-max leakage.
  const double g_lo = std::min(p.g_hrs(), p.g_off()), g_hi = std::max(p.g_hrs(), p.g_off());
  for (int x = 1; x <= 4; ++x) {
    const double expected = (p.g_on * v - ((5 - x) * g_hi - (4 - x) * g_lo) * v) / 2.0;
    CHECK(*sense_margin(table, x) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("sampled envelope lies within the exhaustive envelope at 4x4") {
  for (const char* tech : {"fefet", "reram", "sot_mram"}) {
    auto spec = spec_for(tech, 4, 60);
    spec.config.wire_res_per_gp = 40.0;  // exaggerate parasitics at this tiny size
    spec.config.driver_res = 2000.0;
    const auto exhaustive = build_table(spec, enumerate_states(spec));
    const auto sampled = characterize(spec);
    for (int x = 0; x <= 4; ++x) {
      REQUIRE(sampled.states[x].present());
      CHECK(sampled.states[x].i_min >= exhaustive.states[x].i_min);
      CHECK(sampled.states[x].i_max <= exhaustive.states[x].i_max);
    }
  }
}

TEST_CASE("bit-slice 2 enumeration covers every state") {
  auto spec = spec_for("reram", 2, 10);
  spec.bit_slice = 2;
  const auto samples = enumerate_states(spec);
  CHECK(samples.size() == 64);  // (2 inputs x 4 levels)^2
  const auto table = build_table(spec, samples);
  CHECK(table.x_max() == 6);
  for (const auto& s : table.states) CHECK(s.present());
}

TEST_CASE("leakage only adds at zero parasitics") {
  auto spec = spec_for("reram", 16, 30);
  spec.config = spec.config.ideal();
  spec.config.dummy_column = false;
  const auto table = characterize(spec);
  const double unit = spec.profile.g_on * spec.config.v_read;
  for (int x = 0; x <= table.x_max(); ++x) CHECK(table.states[x].i_min >= x * unit);
}

TEST_CASE("sampling hits the requested state on every sample") {
  auto spec = spec_for("fefet", 16, 20);
  spec.bit_slice = 2;
  spec.active_rows = 8;
  spec.mask_begin = 4;
  const auto samples = sample_states(spec);
  CHECK(samples.size() == 25 * 20);
  const auto table = build_table(spec, samples);
  CHECK(table.x_max() == 24);
  for (const auto& s : table.states) CHECK(s.n_samples == 20);
  for (const auto& s : table.states) CHECK(s.i_min <= s.i_max);
}

TEST_CASE("larger arrays lose sense margin and go negative") {
  auto small = spec_for("fefet", 16, 60);
  auto large = spec_for("fefet", 64, 60);
  const auto rs = summarize(characterize(small));
  const auto rl = summarize(characterize(large));
  REQUIRE(rl.first_negative_state.has_value());
  CHECK_FALSE(rs.first_negative_state.has_value());
  for (int x = 1; x <= 16; ++x) CHECK(*rl.sense_margins[x] < *rs.sense_margins[x]);
}

TEST_CASE("characterization is deterministic and serializes losslessly") {
  const auto spec = spec_for("sot_mram", 16, 25);
  const auto a = characterize(spec);
  const auto b = characterize(spec);
  CHECK(serialize(a) == serialize(b));

  auto other = spec;
  other.sampler.seed = 8;
  CHECK(serialize(characterize(other)) != serialize(a));

  std::istringstream is(serialize(a));
  const auto back = read_table(is);
  CHECK(serialize(back) == serialize(a));
  CHECK(back.profile_name == "sot_mram");
  CHECK(back.active_rows == 16);
}

TEST_CASE("table reader rejects malformed input") {
  std::istringstream empty("");
  CHECK_THROWS_AS(read_table(empty), std::invalid_argument);
  std::istringstream bad_header("# profile=x\nfoo,bar\n");
  CHECK_THROWS_AS(read_table(bad_header), std::invalid_argument);
}

TEST_CASE("characterize argument checks") {
  auto spec = spec_for("fefet", 8);
  spec.sampler.n_per_state = 0;
  CHECK_THROWS_AS(characterize(spec), std::invalid_argument);
  spec = spec_for("fefet", 8);
  spec.active_rows = 6;
  spec.mask_begin = 4;
  CHECK_THROWS_AS(characterize(spec), std::invalid_argument);
  spec = spec_for("fefet", 16);
  CHECK_THROWS_AS(enumerate_states(spec), std::invalid_argument);
}
