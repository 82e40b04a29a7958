#include <algorithm>
#include <atomic>
#include <cstdio>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "xbar/inference.hpp"
#include "xbar/io.hpp"

namespace xbar {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string train_key(const std::string& workload, const TrainOptions& t) {
  using io::format_double;
  std::ostringstream os;
  os << "workload=" << workload << ";hidden=";
  for (int h : t.hidden.empty() ? default_hidden_layers(workload) : t.hidden) os << h << '.';
  os << ";weight_bits=" << t.weight_bits << ";epochs=" << t.epochs << ";batch=" << t.batch_size
     << ";lr=" << format_double(t.learning_rate) << ";quantile=" << format_double(t.calibration_quantile)
     << ";seed=" << t.seed;
  return os.str();
}

std::string clean_message(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

const char* kResultsHeader =
    "fingerprint,workload,profile,rows,cols,wire_res_per_gp_ohm,driver_res_ohm,sink_res_ohm,"
    "pwa_group,bit_slice,adc_mode,seed,samples,accuracy,baseline_accuracy,max_nf,"
    "unconverged_cycles,layer_max_nf,layer_mean_nf,status";

}  // namespace

HardwareConfig ideal_hardware(HardwareConfig hw) {
  hw.crossbar = hw.crossbar.ideal();
  hw.profile.degeneration.alpha = 0.0;
  hw.adc_mode = AdcMode::Linear;
  return hw;
}

std::vector<AdcSpec> build_adcs(const MvmPlan& plan, const HardwareConfig& hw, std::uint64_t seed) {
  std::vector<AdcSpec> adcs;
  for (std::size_t m = 0; m < plan.masks.size(); ++m) {
    const int states = plan.adc_states(static_cast<int>(m));
    if (hw.adc_mode == AdcMode::Linear) {
      adcs.push_back(linear_references(unit_current(hw.profile, hw.crossbar), states - 1));
      continue;
    }
    const BitVector& mask = plan.masks[m];
    CharacterizationSpec spec;
    spec.profile = hw.profile;
    spec.config = hw.crossbar;
    spec.config.rows = plan.array_rows;
    spec.config.cols = plan.array_cols;
    spec.bit_slice = plan.bit_slice;
    spec.active_rows = static_cast<int>(mask.sum());
    for (Eigen::Index i = 0; i < mask.size(); ++i)
      if (mask[i]) {
        spec.mask_begin = static_cast<int>(i);
        break;
      }
    spec.sampler = hw.sampler;
    spec.sampler.seed = seed;
    auto custom = custom_references(characterize(spec));
    if (!custom) throw std::runtime_error("characterization left a state without samples");
    adcs.push_back(std::move(*custom));
  }
  return adcs;
}

double ExperimentResult::max_nf() const {
  double m = 0.0;
  for (const auto& l : layers) m = std::max(m, l.max_nf);
  return m;
}

std::int64_t ExperimentResult::unconverged_cycles() const {
  std::int64_t n = 0;
  for (const auto& l : layers) n += l.unconverged_cycles;
  return n;
}

std::string experiment_fingerprint(const std::string& workload, const TrainOptions& train,
                                   const HardwareConfig& hw, const EvalOptions& eval) {
  using io::format_double;
  const auto& p = hw.profile;
  const auto& c = hw.crossbar;
  std::ostringstream os;
  os << train_key(workload, train) << ";profile=" << p.name << ',' << format_double(p.g_on) << ','
     << format_double(p.ratio_hrs) << ',' << format_double(p.ratio_off) << ','
     << format_double(p.cell_height_gp) << ',' << to_string(p.topology) << ','
     << format_double(p.degeneration.v_sat) << ',' << format_double(p.degeneration.alpha) << ','
     << p.max_levels << ',' << to_string(p.input_mode) << ";array=" << c.rows << 'x' << c.cols << ','
     << format_double(c.wire_res_per_gp) << ',' << format_double(c.driver_res) << ','
     << format_double(c.sink_res) << ',' << format_double(c.v_read) << ',' << c.dummy_column << ','
     << format_double(c.tol_v) << ',' << c.max_iters << ";pwa=" << hw.effective_pwa()
     << ";bit_slice=" << hw.bit_slice << ";adc=" << to_string(hw.adc_mode);
  if (hw.adc_mode == AdcMode::Custom)
    os << ";sampler=" << format_double(hw.sampler.density_in) << ','
       << format_double(hw.sampler.density_w) << ',' << hw.sampler.n_per_state;
  os << ";samples=" << eval.max_test_samples;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(os.str())));
  return buf;
}

ExperimentResult evaluate(const QuantizedNetwork& net, const Workload& wl, const HardwareConfig& hw,
                          std::uint64_t seed, const EvalOptions& eval) {
  hw.profile.validate();
  hw.crossbar.validate();
  if (net.layers.empty()) throw std::invalid_argument("network has no layers");
  if (net.input_bits != wl.input_bits)
    throw std::invalid_argument("network and workload disagree on input bits");

  const int magnitude_bits = net.weight_bits - 1;
  const int group = hw.effective_pwa();
  std::vector<MvmHardware> hardware;
  std::vector<AdcSpec> adcs;  // same array geometry for every layer
  for (const auto& layer : net.layers) {
    const Eigen::MatrixXi phys = differential_split(layer.weights);
    const MvmPlan plan = make_plan(static_cast<int>(phys.rows()), static_cast<int>(phys.cols()),
                                   hw.crossbar.rows, hw.crossbar.cols, magnitude_bits,
                                   net.input_bits, hw.bit_slice, group);
    if (adcs.empty()) adcs = build_adcs(plan, hw, seed);
    hardware.push_back(program_hardware(plan, phys, hw.profile, hw.crossbar, adcs));
  }

  const int total = static_cast<int>(wl.test.features.rows());
  const int n = eval.max_test_samples > 0 ? std::min(total, eval.max_test_samples) : total;
  std::vector<LayerStats> stats(net.layers.size());
  std::vector<double> nf_sum(net.layers.size(), 0.0);
  std::vector<std::int64_t> nf_count(net.layers.size(), 0);
  const LayerMvm mvm = [&](int l, const Eigen::VectorXi& x) {
    MvmOutput out = execute_mvm(hardware[l], x);
    const auto& d = out.diagnostics;
    auto& s = stats[l];
    s.max_nf = std::max(s.max_nf, d.max_nf);
    s.executed_cycles += d.executed_cycles;
    s.unconverged_cycles += d.unconverged_cycles;
    nf_sum[l] += d.nf_sum;
    nf_count[l] += d.nf_count;
    return differential_combine(out.values);
  };

  ExperimentResult r;
  r.workload = wl.name;
  r.profile = hw.profile.name;
  r.rows = hw.crossbar.rows;
  r.cols = hw.crossbar.cols;
  r.wire_res_per_gp = hw.crossbar.wire_res_per_gp;
  r.driver_res = hw.crossbar.driver_res;
  r.sink_res = hw.crossbar.sink_res;
  r.pwa_group = group;
  r.bit_slice = hw.bit_slice;
  r.adc_mode = hw.adc_mode;
  r.seed = seed;
  r.samples = n;
  r.predictions.resize(n);
  for (int i = 0; i < n; ++i) r.predictions[i] = classify(net, wl.test.features.row(i).transpose(), mvm);
  for (std::size_t l = 0; l < stats.size(); ++l)
    stats[l].mean_nf = nf_count[l] ? nf_sum[l] / static_cast<double>(nf_count[l]) : 0.0;
  r.layers = std::move(stats);
  r.accuracy = accuracy(r.predictions, wl.test.labels);
  r.baseline_accuracy =
      accuracy(software_predict(net, wl.test.features.topRows(n)), wl.test.labels);
  return r;
}

std::vector<ExperimentResult> sweep(const std::vector<SweepTask>& tasks,
                                    const std::vector<ExperimentResult>& done,
                                    const std::function<void(const ExperimentResult&)>& on_result,
                                    const std::string& data_dir, int workers) {
  std::vector<ExperimentResult> out(tasks.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& task = tasks[i];
    const std::string fp = experiment_fingerprint(task.workload, task.train, task.hw, task.eval);
    const auto prior = std::find_if(done.begin(), done.end(), [&](const ExperimentResult& r) {
      return r.fingerprint == fp && r.status == "ok";
    });
    if (prior != done.end()) {
      out[i] = *prior;
    } else {
      out[i].fingerprint = fp;
      pending.push_back(i);
    }
  }

  // Workloads and trained networks are shared read-only by all workers, so
  // they are built up front, in task order.
  std::map<std::string, std::optional<Workload>> workloads;
  std::map<std::string, std::optional<QuantizedNetwork>> networks;
  std::map<std::string, std::string> failures;
  for (std::size_t i : pending) {
    const auto& task = tasks[i];
    const std::string key = train_key(task.workload, task.train);
    if (networks.count(key)) continue;
    networks[key];
    try {
      auto& wl = workloads[task.workload];
      if (!wl) wl = load_workload(task.workload, 4, data_dir);
      networks[key] = train_reference(*wl, task.train);
    } catch (const std::exception& e) {
      failures[key] = e.what();
    }
  }

  std::mutex reducer;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < pending.size();) {
      const std::size_t i = pending[k];
      const auto& task = tasks[i];
      const std::string key = train_key(task.workload, task.train);
      ExperimentResult r;
      try {
        if (auto f = failures.find(key); f != failures.end()) throw std::runtime_error(f->second);
        r = evaluate(*networks.at(key), *workloads.at(task.workload), task.hw, task.train.seed,
                     task.eval);
      } catch (const std::exception& e) {
        r = ExperimentResult{};
        r.workload = task.workload;
        r.profile = task.hw.profile.name;
        r.rows = task.hw.crossbar.rows;
        r.cols = task.hw.crossbar.cols;
        r.wire_res_per_gp = task.hw.crossbar.wire_res_per_gp;
        r.driver_res = task.hw.crossbar.driver_res;
        r.sink_res = task.hw.crossbar.sink_res;
        r.pwa_group = task.hw.effective_pwa();
        r.bit_slice = task.hw.bit_slice;
        r.adc_mode = task.hw.adc_mode;
        r.seed = task.train.seed;
        r.status = "error: " + clean_message(e.what());
      }
      r.fingerprint = out[i].fingerprint;
      std::lock_guard<std::mutex> lock(reducer);
      if (on_result) on_result(r);
      out[i] = std::move(r);
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(pending.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

void write_results(std::ostream& os, const std::vector<ExperimentResult>& results) {
  using io::format_double;
  os << kResultsHeader << '\n';
  for (const auto& r : results) {
    std::vector<std::string> lmax, lmean;
    for (const auto& l : r.layers) {
      lmax.push_back(format_double(l.max_nf));
      lmean.push_back(format_double(l.mean_nf));
    }
    os << r.fingerprint << ',' << r.workload << ',' << r.profile << ',' << r.rows << ',' << r.cols
       << ',' << format_double(r.wire_res_per_gp) << ',' << format_double(r.driver_res) << ','
       << format_double(r.sink_res) << ',' << r.pwa_group << ',' << r.bit_slice << ','
       << to_string(r.adc_mode) << ',' << r.seed << ',' << r.samples << ','
       << format_double(r.accuracy) << ',' << format_double(r.baseline_accuracy) << ','
       << format_double(r.max_nf()) << ',' << r.unconverged_cycles() << ','
       << io::join(lmax, ';') << ',' << io::join(lmean, ';') << ',' << r.status << '\n';
  }
}

std::vector<ExperimentResult> read_results(std::istream& is) {
  std::string line;
  bool header = false;
  std::vector<ExperimentResult> out;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto t = io::trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (!header) {
      if (t != kResultsHeader) throw std::invalid_argument("results header not recognized");
      header = true;
      continue;
    }
    const auto f = io::split(t, ',');
    if (f.size() != 20)
      throw std::invalid_argument("results line " + std::to_string(line_no) + ": expected 20 fields");
    ExperimentResult r;
    r.fingerprint = f[0];
    r.workload = f[1];
    r.profile = f[2];
    r.rows = static_cast<int>(io::parse_int(f[3]));
    r.cols = static_cast<int>(io::parse_int(f[4]));
    r.wire_res_per_gp = io::parse_double(f[5]);
    r.driver_res = io::parse_double(f[6]);
    r.sink_res = io::parse_double(f[7]);
    r.pwa_group = static_cast<int>(io::parse_int(f[8]));
    r.bit_slice = static_cast<int>(io::parse_int(f[9]));
    r.adc_mode = parse_adc_mode(f[10]);
    r.seed = static_cast<std::uint64_t>(io::parse_int(f[11]));
    r.samples = static_cast<int>(io::parse_int(f[12]));
    r.accuracy = io::parse_double(f[13]);
    r.baseline_accuracy = io::parse_double(f[14]);
    const auto lmax = f[17].empty() ? std::vector<std::string>{} : io::split(f[17], ';');
    const auto lmean = f[18].empty() ? std::vector<std::string>{} : io::split(f[18], ';');
    if (lmax.size() != lmean.size()) throw std::invalid_argument("per-layer NF lists differ in length");
    for (std::size_t k = 0; k < lmax.size(); ++k) {
      LayerStats s;
      s.max_nf = io::parse_double(lmax[k]);
      s.mean_nf = io::parse_double(lmean[k]);
      r.layers.push_back(s);
    }
    if (!r.layers.empty()) r.layers[0].unconverged_cycles = io::parse_int(f[16]);
    r.status = f[19];
    out.push_back(std::move(r));
  }
  if (!header) throw std::invalid_argument("results file is empty");
  return out;
}

}  // namespace xbar
