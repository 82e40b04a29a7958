#include "doctest.h"

#include <algorithm>
#include <set>
#include <sstream>

#include "xbar/inference.hpp"

using namespace xbar;

namespace {

const Workload& digits() {
  static const Workload wl = load_workload("digits8x8");
  return wl;
}

const QuantizedNetwork& digits_net() {
  static const QuantizedNetwork net = train_reference(digits(), TrainOptions{});
  return net;
}

// Plain-loop integer forward pass, written independently of classify().
int oracle_classify(const QuantizedNetwork& net, const std::vector<long long>& features) {
  const long long top = (1LL << net.input_bits) - 1;
  std::vector<long long> x = features;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    std::vector<long long> acc(layer.weights.cols(), 0);
    for (int j = 0; j < layer.weights.cols(); ++j) {
      for (int i = 0; i < layer.weights.rows(); ++i) acc[j] += static_cast<long long>(layer.weights(i, j)) * x[i];
      acc[j] += layer.bias[j];
    }
    if (l + 1 == net.layers.size())
      return static_cast<int>(std::max_element(acc.begin(), acc.end()) - acc.begin());
    for (auto& a : acc) a = std::clamp(std::llround(static_cast<double>(a) * layer.requant), 0LL, top);
    x = acc;
  }
  return -1;
}

HardwareConfig hardware(const std::string& tech, int rows) {
  HardwareConfig hw;
  hw.profile = builtin_profile(tech);
  hw.crossbar.rows = hw.crossbar.cols = rows;
  return hw;
}

}  // namespace

TEST_CASE("digits workload has the expected shape and a fixed split") {
  const Workload& wl = digits();
  CHECK(wl.n_features == 64);
  CHECK(wl.n_classes == 10);
  CHECK(wl.train.features.cols() == 64);
  CHECK(wl.train.features.rows() + wl.test.features.rows() == 1797);
  CHECK(wl.test.features.rows() == doctest::Approx(0.2 * 1797).epsilon(0.01));
  CHECK(wl.train.features.minCoeff() >= 0);
  CHECK(wl.train.features.maxCoeff() <= 15);
  CHECK(wl.test.labels.minCoeff() == 0);
  CHECK(wl.test.labels.maxCoeff() == 9);

  const Workload again = load_workload("digits8x8");
  CHECK(again.test.features == wl.test.features);
  CHECK(again.train.labels == wl.train.labels);
}

TEST_CASE("synthetic workload is deterministic") {
  const Workload a = load_workload("synthetic-deep");
  const Workload b = load_workload("synthetic-deep");
  CHECK(a.n_features == 32);
  CHECK(a.n_classes == 4);
  CHECK(a.train.features.rows() + a.test.features.rows() == 2000);
  CHECK(a.train.features == b.train.features);
  CHECK(a.test.labels == b.test.labels);
  CHECK(a.test.features.maxCoeff() <= 15);
  CHECK_THROWS(load_workload("no-such-workload"));
  CHECK(default_hidden_layers("synthetic-deep").size() > default_hidden_layers("digits8x8").size());
}

TEST_CASE("quantized reference network") {
  const QuantizedNetwork& net = digits_net();
  CHECK(net.quantized_test_accuracy >= 0.85);
  CHECK(net.float_test_accuracy >= 0.85);
  const int qmax = (1 << (net.weight_bits - 1)) - 1;
  for (const auto& layer : net.layers) {
    CHECK(layer.weights.cwiseAbs().maxCoeff() <= qmax);
    CHECK(layer.requant > 0.0);
  }
  CHECK(net.layers.front().weights.rows() == 64);
  CHECK(net.layers.back().weights.cols() == 10);

  SUBCASE("software prediction matches a loop-level oracle") {
    const auto& f = digits().test.features;
    const auto pred = software_predict(net, f);
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      std::vector<long long> x(f.cols());
      for (Eigen::Index k = 0; k < f.cols(); ++k) x[k] = f(i, k);
      REQUIRE(pred[i] == oracle_classify(net, x));
    }
    CHECK(accuracy(pred, digits().test.labels) == net.quantized_test_accuracy);
  }

  SUBCASE("training is a pure function of its options") {
    TrainOptions t;
    t.epochs = 8;
    const auto a = train_reference(digits(), t);
    const auto b = train_reference(digits(), t);
    t.seed = 2;
    const auto c = train_reference(digits(), t);
    REQUIRE(a.layers.size() == b.layers.size());
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
      CHECK(a.layers[l].weights == b.layers[l].weights);
      CHECK(a.layers[l].bias == b.layers[l].bias);
      CHECK(a.layers[l].requant == b.layers[l].requant);
    }
    CHECK(a.layers[0].weights != c.layers[0].weights);
  }
}

TEST_CASE("accuracy helper") {
  Eigen::VectorXi labels(4);
  labels << 0, 1, 2, 3;
  CHECK(accuracy({0, 1, 0, 3}, labels) == 0.75);
  CHECK(accuracy({}, labels) == 0.0);
}

TEST_CASE("ideal hardware reproduces the software predictions") {
  const QuantizedNetwork& net = digits_net();
  EvalOptions eval;
  eval.max_test_samples = 60;
  const auto software = software_predict(net, digits().test.features.topRows(60));
  for (const std::string tech : {"fefet", "reram", "sram8t", "sot_mram"})
    for (auto [rows, pwa, bs] : {std::tuple{16, 0, 1}, std::tuple{32, 8, 2}}) {
      CAPTURE(tech);
      CAPTURE(rows);
      HardwareConfig hw = hardware(tech, rows);
      hw.crossbar.wire_res_per_gp = 500.0;
      hw.pwa_group = pwa;
      hw.bit_slice = hw.profile.max_levels >= 4 ? bs : 1;
      const auto r = evaluate(net, digits(), ideal_hardware(hw), 1, eval);
      CHECK(r.predictions == software);
      CHECK(r.samples == 60);
      CHECK(r.max_nf() == 0.0);
    }
}

TEST_CASE("non-ideal evaluation reports diagnostics") {
  HardwareConfig hw = hardware("reram", 64);
  hw.crossbar.wire_res_per_gp = 160.0;
  EvalOptions eval;
  eval.max_test_samples = 40;
  const auto r = evaluate(digits_net(), digits(), hw, 3, eval);
  CHECK(r.status == "ok");
  CHECK(r.layers.size() == digits_net().layers.size());
  CHECK(r.max_nf() > 0.0);
  CHECK(r.pwa_group == 64);
  CHECK(r.seed == 3);
  CHECK(r.accuracy >= 0.0);
  CHECK(r.accuracy <= 1.0);
  CHECK(r.baseline_accuracy == accuracy(software_predict(digits_net(), digits().test.features.topRows(40)),
                                        digits().test.labels.head(40)));
}

TEST_CASE("experiment fingerprint") {
  const TrainOptions t;
  const EvalOptions e;
  const HardwareConfig base = hardware("fefet", 32);
  const std::string fp = experiment_fingerprint("digits8x8", t, base, e);
  CHECK(fp.size() == 16);
  CHECK(fp.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(experiment_fingerprint("digits8x8", t, base, e) == fp);

  HardwareConfig fwa = base;
  fwa.pwa_group = 32;
  CHECK(experiment_fingerprint("digits8x8", t, fwa, e) == fp);

  std::set<std::string> seen{fp};
  auto differs = [&](const std::string& wl, TrainOptions tt, HardwareConfig hw, EvalOptions ee) {
    return seen.insert(experiment_fingerprint(wl, tt, hw, ee)).second;
  };
  CHECK(differs("synthetic-deep", t, base, e));
  TrainOptions t2 = t;
  t2.seed = 2;
  CHECK(differs("digits8x8", t2, base, e));
  HardwareConfig h = base;
  h.crossbar.wire_res_per_gp = 3.0;
  CHECK(differs("digits8x8", t, h, e));
  h = base;
  h.pwa_group = 8;
  CHECK(differs("digits8x8", t, h, e));
  h = base;
  h.adc_mode = AdcMode::Custom;
  CHECK(differs("digits8x8", t, h, e));
  h = base;
  h.profile.degeneration.alpha = 0.5;
  CHECK(differs("digits8x8", t, h, e));
  EvalOptions e2;
  e2.max_test_samples = 10;
  CHECK(differs("digits8x8", t, base, e2));
}

TEST_CASE("results round-trip") {
  ExperimentResult r;
  r.fingerprint = "0123456789abcdef";
  r.workload = "digits8x8";
  r.profile = "reram";
  r.rows = r.cols = 64;
  r.wire_res_per_gp = 0.1;
  r.driver_res = 100;
  r.sink_res = 50;
  r.pwa_group = 32;
  r.bit_slice = 2;
  r.adc_mode = AdcMode::Custom;
  r.seed = 5;
  r.samples = 359;
  r.accuracy = 1.0 / 3.0;
  r.baseline_accuracy = 0.9;
  r.layers = {{0.25, 1e-3, 10, 1}, {0.125, 2e-4, 4, 0}};
  ExperimentResult failed = r;
  failed.fingerprint = "fedcba9876543210";
  failed.layers.clear();
  failed.status = "error: something broke";

  std::ostringstream os;
  write_results(os, {r, failed});
  std::istringstream is(os.str());
  const auto back = read_results(is);
  REQUIRE(back.size() == 2);
  CHECK(back[0].accuracy == r.accuracy);
  CHECK(back[0].wire_res_per_gp == r.wire_res_per_gp);
  CHECK(back[0].adc_mode == AdcMode::Custom);
  CHECK(back[0].layers.size() == 2);
  CHECK(back[0].max_nf() == 0.25);
  CHECK(back[0].unconverged_cycles() == 1);
  CHECK(back[1].status == failed.status);
  std::ostringstream again;
  write_results(again, back);
  CHECK(again.str() == os.str());

  std::istringstream bad("fingerprint,workload\nx,y\n");
  CHECK_THROWS(read_results(bad));
}

TEST_CASE("sweep resumes, records failures and is independent of worker count") {
  std::vector<SweepTask> tasks;
  for (int rows : {16, 32}) {
    SweepTask t;
    t.train.epochs = 4;
    t.hw = hardware("fefet", rows);
    t.eval.max_test_samples = 15;
    tasks.push_back(t);
  }
  SweepTask broken = tasks[0];
  broken.hw.bit_slice = 7;  // wider than the cell can hold
  tasks.insert(tasks.begin() + 1, broken);

  int calls = 0;
  const auto first = sweep(tasks, {}, [&](const ExperimentResult&) { ++calls; });
  REQUIRE(first.size() == 3);
  CHECK(calls == 3);
  CHECK(first[0].status == "ok");
  CHECK(first[1].status.rfind("error: ", 0) == 0);
  CHECK(first[1].status.find(',') == std::string::npos);
  CHECK(first[2].status == "ok");
  CHECK(first[0].rows == 16);
  CHECK(first[2].rows == 32);

  calls = 0;
  const auto resumed = sweep(tasks, first, [&](const ExperimentResult&) { ++calls; });
  CHECK(calls == 1);  // only the failure is retried
  CHECK(resumed[0].predictions == first[0].predictions);

  const auto parallel = sweep(tasks, {}, {}, default_data_dir(), 3);
  std::ostringstream a, b;
  write_results(a, first);
  write_results(b, parallel);
  CHECK(a.str() == b.str());
}
