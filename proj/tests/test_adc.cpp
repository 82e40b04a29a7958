#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "xbar/adc.hpp"

using namespace xbar;

namespace {

CharacterizationSpec spec_for(const std::string& tech, int rows, int n_per_state = 40) {
  CharacterizationSpec s;
  s.profile = builtin_profile(tech);
  s.config.rows = rows;
  s.config.cols = rows;
  s.sampler.n_per_state = n_per_state;
  s.sampler.seed = 3;
  return s;
}

int decode_errors(const AdcSpec& adc, const std::vector<CharacterizationSample>& samples) {
  int wrong = 0;
  for (const auto& s : samples) wrong += quantize(adc, s.current) != s.state;
  return wrong;
}

}  // namespace

TEST_CASE("linear references sit half a unit below each state") {
  const auto adc = linear_references(5e-6, 4);
  REQUIRE(adc.n_states() == 5);
  CHECK(adc.references[0] == doctest::Approx(2.5e-6));
  CHECK(adc.references[3] == doctest::Approx(17.5e-6));
  CHECK(quantize(adc, 0.0) == 0);
  CHECK(quantize(adc, 2.4e-6) == 0);
  CHECK(quantize(adc, 2.5e-6) == 1);  // tie goes up
  CHECK(quantize(adc, 11e-6) == 2);
  CHECK(quantize(adc, 1.0) == 4);
  CHECK_THROWS_AS(linear_references(0.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(linear_references(1e-6, 0), std::invalid_argument);
}

TEST_CASE("custom references are interval midpoints") {
  CharacterizationTable t;
  t.states = {{0.0, 1e-6, 1}, {9e-6, 11e-6, 1}, {18e-6, 22e-6, 1}};
  const auto adc = custom_references(t);
  REQUIRE(adc.has_value());
  CHECK(adc->mode == AdcMode::Custom);
  CHECK(adc->references[0] == doctest::Approx(5e-6));
  CHECK(adc->references[1] == doctest::Approx(14.5e-6));

  t.states[1].n_samples = 0;
  CHECK_FALSE(custom_references(t).has_value());
}

TEST_CASE("overlapping intervals still give a strictly increasing ladder") {
  CharacterizationTable t;
  // Midpoints 10, 8 and 12: the second one must be lifted past the first.
  t.states = {{0.0, 12e-6, 1}, {8e-6, 14e-6, 1}, {2e-6, 20e-6, 1}, {4e-6, 30e-6, 1}};
  const auto raw = raw_custom_thresholds(t);
  REQUIRE(raw.has_value());
  CHECK((*raw)[1] < (*raw)[0]);
  const auto adc = custom_references(t);
  REQUIRE(adc.has_value());
  for (std::size_t k = 1; k < adc->references.size(); ++k)
    CHECK(adc->references[k] - adc->references[k - 1] >= kMinReferenceSeparation * 0.999);
  CHECK(adc->references[0] == (*raw)[0]);
}

TEST_CASE("dummy subtraction clamps at zero") {
  CHECK(dummy_subtract(10e-6, 4e-6) == doctest::Approx(6e-6));
  CHECK(dummy_subtract(4e-6, 10e-6) == 0.0);
}

TEST_CASE("unit current depends on the dummy column") {
  const auto p = builtin_profile("reram");
  CrossbarConfig c;
  CHECK(unit_current(p, c) == doctest::Approx((p.g_on - p.g_hrs()) * c.v_read));
  c.dummy_column = false;
  CHECK(unit_current(p, c) == doctest::Approx(p.g_on * c.v_read));
}

TEST_CASE("quantize is monotone and bounded") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(-1e-6, 60e-6);
  const auto adc = linear_references(4e-6, 12);
  for (int i = 0; i < 500; ++i) {
    const double a = d(rng), b = d(rng);
    const double lo = std::min(a, b), hi = std::max(a, b);
    CHECK(quantize(adc, lo) <= quantize(adc, hi));
    CHECK(quantize(adc, hi) >= 0);
    CHECK(quantize(adc, hi) <= adc.x_max());
  }
}

TEST_CASE("custom ladder collapses to the linear ladder at zero parasitics") {
  auto spec = spec_for("fefet", 16, 20);
  spec.config = spec.config.ideal();
  spec.profile.ratio_hrs = 1e12;  // no leakage either
  spec.profile.ratio_off = 1e12;
  const auto table = characterize(spec);
  const auto custom = custom_references(table);
  REQUIRE(custom.has_value());
  const auto linear = linear_references(unit_current(spec.profile, spec.config), table.x_max());
  for (int x = 1; x <= table.x_max(); ++x)
    CHECK(custom->references[x - 1] == doctest::Approx(linear.references[x - 1]).epsilon(1e-9));
}

TEST_CASE("replaying characterization samples through the custom ladder") {
  for (const char* tech : {"fefet", "reram", "sot_mram", "sram8t"}) {
    CAPTURE(tech);
    const auto spec = spec_for(tech, 64, 30);
    const auto samples = sample_states(spec);
    const auto table = build_table(spec, samples);
    const auto custom = custom_references(table);
    REQUIRE(custom.has_value());
    const auto linear = linear_references(unit_current(spec.profile, spec.config), table.x_max());

    // Custom references never decode worse than linear ones on the data they came from.
    CHECK(decode_errors(*custom, samples) <= decode_errors(linear, samples));

    // Where both neighbouring margins are positive, decoding is exact.
    const auto report = summarize(table);
    for (const auto& s : samples) {
      const int x = s.state;
      const bool below = x == 0 || (report.sense_margins[x] && *report.sense_margins[x] > 0);
      const bool above = x == table.x_max() ||
                         (report.sense_margins[x + 1] && *report.sense_margins[x + 1] > 0);
      if (below && above) CHECK(quantize(*custom, s.current) == x);
    }
  }
}

TEST_CASE("a column of zero weights next to the dummy reads as zero") {
  for (const auto& p : builtin_profiles()) {
    CAPTURE(p.name);
    CrossbarConfig c;
    c.rows = 64;
    c.cols = 1;
    const auto inst = build_crossbar(p, c, Eigen::MatrixXi::Zero(64, 1), 1);
    const auto res = solve(inst, full_mask(64), full_mask(64));
    const auto adc = linear_references(unit_current(p, c), 64);
    const double i = dummy_subtract(res.sl_currents[0], res.sl_currents[inst.dummy_index()]);
    CHECK(quantize(adc, i) == 0);
  }
}

TEST_CASE("ladder files round-trip and reject bad input") {
  CharacterizationTable t;
  t.states = {{0.0, 1e-6, 1}, {9e-6, 11e-6, 1}, {18e-6, 22e-6, 1}};
  const auto adc = *custom_references(t);
  std::ostringstream os;
  write_ladder(os, adc);
  std::istringstream is(os.str());
  const auto back = read_ladder(is);
  CHECK(back.mode == AdcMode::Custom);
  CHECK(back.references == adc.references);

  std::istringstream unsorted("# mode=linear\nstate,threshold_A\n1,2e-6\n2,1e-6\n");
  CHECK_THROWS_AS(read_ladder(unsorted), std::invalid_argument);
  std::istringstream gap("# mode=linear\nstate,threshold_A\n1,2e-6\n3,4e-6\n");
  CHECK_THROWS_AS(read_ladder(gap), std::invalid_argument);
  CHECK_THROWS_AS(parse_adc_mode("flash"), std::invalid_argument);
}

TEST_CASE("reference ladder report lists deviations per state") {
  CharacterizationTable t;
  t.states = {{0.0, 1e-6, 1}, {9e-6, 11e-6, 1}, {18e-6, 22e-6, 1}};
  const auto custom = *custom_references(t);
  const auto linear = linear_references(10e-6, 2);
  const auto rows = reference_ladder_report(t, linear, custom);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].deviation == doctest::Approx(0.0));
  CHECK(rows[1].deviation == doctest::Approx(-0.5e-6));
  CHECK(rows[1].i_min == 18e-6);
  std::ostringstream os;
  write_ladder_report(os, rows);
  CHECK(os.str().rfind("state,i_min_A,i_max_A,linear_ref_A,custom_ref_A,deviation_A\n", 0) == 0);
  CHECK_THROWS_AS(reference_ladder_report(t, linear_references(1e-6, 3), custom),
                  std::invalid_argument);
}
