#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "xbar/adc.hpp"
#include "xbar/mvm.hpp"

namespace xbar {

struct Dataset {
  Eigen::MatrixXi features;  // samples x features, each in [0, 2^input_bits)
  Eigen::VectorXi labels;
};

struct Workload {
  std::string name;
  int input_bits = 4;
  int n_features = 0;
  int n_classes = 0;
  Dataset train;
  Dataset test;
};

// Where the bundled datasets live; set at build time, overridable per call.
std::string default_data_dir();

/// "digits8x8" (64 features, 10 classes, bundled CSV) or "synthetic-deep"
/// (32 features, 4 classes, sparse generated prototypes). Always the same split.
Workload load_workload(const std::string& name, int input_bits = 4,
                       const std::string& data_dir = default_data_dir());

/// Hidden layer widths used when none are given.
std::vector<int> default_hidden_layers(const std::string& workload);

struct TrainOptions {
  std::vector<int> hidden;  // empty: default_hidden_layers(workload)
  int weight_bits = 4;      // signed, symmetric: magnitudes use weight_bits - 1 bits
  int epochs = 60;
  int batch_size = 32;
  double learning_rate = 0.01;
  double calibration_quantile = 0.999;
  std::uint64_t seed = 1;
};

// One dense layer in integer form. Hidden layers requantize their
// accumulator to the next layer's input code with `requant`; the last layer's
// accumulator (plus bias) is the logit vector.
struct QuantizedLayer {
  Eigen::MatrixXi weights;  // inputs x outputs, |w| <= 2^(weight_bits-1) - 1
  IntVector bias;           // in accumulator units
  double requant = 1.0;
};

struct QuantizedNetwork {
  std::vector<QuantizedLayer> layers;
  int weight_bits = 4;
  int input_bits = 4;
  double float_test_accuracy = 0.0;
  double quantized_test_accuracy = 0.0;
};

QuantizedNetwork train_reference(const Workload& workload, const TrainOptions& options);

/// Accumulator of one layer for one input code vector.
using LayerMvm = std::function<IntVector(int layer, const Eigen::VectorXi& inputs)>;

/// Runs the integer network with the given MVM; returns the predicted class.
int classify(const QuantizedNetwork& net, const Eigen::VectorXi& features, const LayerMvm& mvm);

std::vector<int> software_predict(const QuantizedNetwork& net, const Eigen::MatrixXi& features);

double accuracy(const std::vector<int>& predictions, const Eigen::VectorXi& labels);

struct HardwareConfig {
  TechnologyProfile profile;
  CrossbarConfig crossbar;  // rows x cols is the array size
  int pwa_group = 0;        // 0: full activation
  int bit_slice = 1;
  AdcMode adc_mode = AdcMode::Linear;
  SamplerParams sampler;    // seed replaced by the evaluation seed

  int effective_pwa() const { return pwa_group > 0 ? pwa_group : crossbar.rows; }
};

/// Zero parasitics, no source degeneration, linear references.
HardwareConfig ideal_hardware(HardwareConfig hw);

/// One ADC ladder per activation window of `plan`, from the configured mode.
std::vector<AdcSpec> build_adcs(const MvmPlan& plan, const HardwareConfig& hw, std::uint64_t seed);

struct LayerStats {
  double max_nf = 0.0;
  double mean_nf = 0.0;
  std::int64_t executed_cycles = 0;
  std::int64_t unconverged_cycles = 0;
};

struct EvalOptions {
  int max_test_samples = 0;  // 0: the whole test split
};

struct ExperimentResult {
  std::string fingerprint;
  std::string workload;
  std::string profile;
  int rows = 0;
  int cols = 0;
  double wire_res_per_gp = 0.0;
  double driver_res = 0.0;
  double sink_res = 0.0;
  int pwa_group = 0;
  int bit_slice = 1;
  AdcMode adc_mode = AdcMode::Linear;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double baseline_accuracy = 0.0;
  int samples = 0;
  std::vector<LayerStats> layers;
  std::vector<int> predictions;
  std::string status = "ok";

  double max_nf() const;
  std::int64_t unconverged_cycles() const;
};

/// Stable identity of one experiment: everything that can change its result.
std::string experiment_fingerprint(const std::string& workload, const TrainOptions& train,
                                   const HardwareConfig& hw, const EvalOptions& eval);

ExperimentResult evaluate(const QuantizedNetwork& net, const Workload& workload,
                          const HardwareConfig& hw, std::uint64_t seed,
                          const EvalOptions& eval = {});

struct SweepTask {
  std::string workload = "digits8x8";
  TrainOptions train;  // train.seed is the experiment seed
  HardwareConfig hw;
  EvalOptions eval;
};

/// Runs every task not already present (status ok) in `done` on a pool of
/// `workers` threads; the returned results follow task order. Failures are
/// recorded with their message and the sweep continues. `on_result` sees each
/// new result as soon as it exists, one call at a time.
std::vector<ExperimentResult> sweep(
    const std::vector<SweepTask>& tasks, const std::vector<ExperimentResult>& done = {},
    const std::function<void(const ExperimentResult&)>& on_result = {},
    const std::string& data_dir = default_data_dir(), int workers = 1);

// Delimited text, one row per result, keyed by fingerprint.
void write_results(std::ostream& os, const std::vector<ExperimentResult>& results);
std::vector<ExperimentResult> read_results(std::istream& is);

}  // namespace xbar
