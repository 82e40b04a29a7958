#include "xbar/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "xbar/config.hpp"
#include "xbar/io.hpp"
#include "xbar/report.hpp"

namespace xbar {

namespace fs = std::filesystem;

namespace {

struct Flag {
  std::string name;  // e.g. "--rows"
  std::string key;   // config key it sets
  std::string help;
};

const std::map<std::string, std::vector<Flag>>& subcommand_flags() {
  static const std::map<std::string, std::vector<Flag>> table = [] {
    const Flag tech{"--tech", "profile.tech", "technology profile"};
    const Flag rows{"--rows", "crossbar.rows", "array rows"};
    const Flag cols{"--cols", "crossbar.cols", "array columns"};
    const Flag wire{"--wire", "crossbar.wire_res_per_gp_ohm", "wire resistance per gate pitch, ohm"};
    const Flag seed{"--seed", "run.seed", "seed"};
    const Flag bs{"--bit-slice", "mapping.bit_slice", "weight bits per cell"};
    const Flag pwa{"--pwa", "mapping.pwa_group", "rows per activation window (0 = all)"};
    const Flag adc{"--adc", "adc.mode", "linear or custom"};
    const Flag samples{"--samples", "workload.max_test_samples", "test samples (0 = all)"};
    const Flag workload{"--workload", "workload.name", "digits8x8 or synthetic-deep"};
    const Flag epochs{"--epochs", "workload.epochs", "training epochs"};
    const Flag results{"--results", "io.results", "results file"};
    std::map<std::string, std::vector<Flag>> t;
    t["characterize"] = {tech, rows, cols, wire, seed, bs,
                         {"--active-rows", "characterize.active_rows", "rows in the window (0 = all)"},
                         {"--mask-begin", "characterize.mask_begin", "first row of the window"},
                         {"--n-per-state", "sampler.n_per_state", "patterns per output state"}};
    t["ladder"] = {{"--table", "io.table", "characterization table"},
                   {"--mode", "adc.mode", "linear or custom"}};
    t["mvm"] = {tech, rows, cols, wire, seed, bs, pwa, adc,
                {"--matrix-rows", "mvm.matrix_rows", "weight matrix rows"},
                {"--matrix-cols", "mvm.matrix_cols", "weight matrix columns"},
                {"--weight-bits", "mapping.weight_bits", "weight bits"},
                {"--input-bits", "mapping.input_bits", "input bits"}};
    t["infer"] = {tech, rows, cols, wire, seed, bs, pwa, adc, workload, samples, epochs};
    t["sweep"] = {workload, samples, epochs, results,
                  {"--seeds", "sweep.seeds", "comma-separated seeds"},
                  {"--workers", "run.workers", "worker threads (0 = all cores)"}};
    t["report"] = {results, {"--kind", "report.kind", "array-size, pwa, adc, bit-slice or wire"}};
    return t;
  }();
  return table;
}

const std::map<std::string, std::string> kGridAxes = {
    {"arrays", "sweep.arrays"},         {"techs", "sweep.techs"},
    {"pwa", "sweep.pwa_groups"},        {"pwa_groups", "sweep.pwa_groups"},
    {"adc", "sweep.adc_modes"},         {"adc_modes", "sweep.adc_modes"},
    {"bit_slices", "sweep.bit_slices"}, {"wires", "sweep.wires_ohm"},
    {"wires_ohm", "sweep.wires_ohm"},   {"seeds", "sweep.seeds"}};

Assignment split_assignment(const std::string& text, const std::string& what) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError(what + " expects key=value, got '" + text + "'");
  return {std::string(io::trim(text.substr(0, eq))), text.substr(eq + 1)};
}

struct Invocation {
  std::string subcommand;
  ExperimentConfig config;
  fs::path out_dir;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

std::ifstream open_in(const std::string& path, const std::string& what) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + what + " '" + path + "'");
  return is;
}

// Write to a sibling temp file, then rename, so readers never see a torn file.
template <typename F>
void write_atomically(const fs::path& path, F write) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    auto os = open_out(tmp);
    write(os);
    if (!os) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_resolved_config(const Invocation& inv) {
  auto os = open_out(inv.out_dir / (inv.subcommand + "_config.ini"));
  write_config(os, inv.config);
}

void require_inference_inputs(const ExperimentConfig& cfg) {
  if (cfg.input_bits != 4) throw ConfigError("mapping.input_bits: inference workloads use 4-bit inputs");
}

// characterize: table.csv, metrics.csv
int run_characterize(const Invocation& inv, std::ostream& out) {
  const ExperimentConfig& cfg = inv.config;
  CharacterizationSpec spec;
  spec.profile = cfg.profile;
  spec.config = cfg.crossbar;
  spec.bit_slice = cfg.bit_slice;
  spec.active_rows = cfg.active_rows;
  spec.mask_begin = cfg.mask_begin;
  spec.sampler = cfg.sampler;
  spec.sampler.seed = cfg.seed;
  const auto samples = sample_states(spec);
  const auto table = build_table(spec, samples);
  std::vector<double> nfs;
  for (const auto& s : samples)
    if (auto nf = non_ideality_factor(s.ideal_current, s.raw_current)) nfs.push_back(*nf);
  const MetricsReport m = summarize(table, nfs);

  {
    auto os = open_out(inv.out_dir / "table.csv");
    write_table(os, table);
  }
  {
    auto os = open_out(inv.out_dir / "metrics.csv");
    os << "# min_sense_margin_A=" << io::format_double(m.min_sense_margin) << '\n';
    os << "# first_negative_state="
       << (m.first_negative_state ? std::to_string(*m.first_negative_state) : std::string("none")) << '\n';
    os << "# max_nf=" << io::format_double(m.max_nf) << '\n';
    os << "state,sense_margin_A\n";
    for (int x = 1; x <= table.x_max(); ++x) {
      const auto& sm = m.sense_margins[x];
      os << x << ',' << (sm ? io::format_double(*sm) : std::string("--")) << '\n';
    }
  }
  int present = 0;
  for (const auto& s : table.states) present += s.present();
  out << "characterized " << cfg.profile.name << ' ' << cfg.crossbar.rows << 'x' << cfg.crossbar.cols
      << ": " << present << '/' << table.states.size() << " states, min sense margin "
      << io::format_double(m.min_sense_margin) << " A, max NF " << io::format_double(m.max_nf) << '\n';
  return kExitOk;
}

// ladder: ladder.csv, ladder_report.csv
int run_ladder(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const ExperimentConfig& cfg = inv.config;
  if (cfg.table_path.empty()) throw ConfigError("io.table: no characterization table given (--table)");
  auto is = open_in(cfg.table_path, "table");
  const CharacterizationTable table = read_table(is);
  const AdcSpec linear = linear_references(table.unit_current, table.x_max());
  const auto custom = custom_references(table);
  if (cfg.adc_mode == AdcMode::Custom && !custom)
    throw std::runtime_error("table has states without samples; custom references need all of them");
  const AdcSpec& chosen = cfg.adc_mode == AdcMode::Custom ? *custom : linear;
  {
    auto os = open_out(inv.out_dir / "ladder.csv");
    write_ladder(os, chosen);
  }
  if (custom) {
    auto os = open_out(inv.out_dir / "ladder_report.csv");
    write_ladder_report(os, reference_ladder_report(table, linear, *custom));
  } else {
    err << "warning: table is incomplete, ladder_report.csv not written\n";
  }
  out << to_string(chosen.mode) << " ladder with " << chosen.references.size() << " references\n";
  return kExitOk;
}

// mvm: mvm.csv, plan.txt, cycles.csv
int run_mvm(const Invocation& inv, std::ostream& out) {
  const ExperimentConfig& cfg = inv.config;
  if (cfg.matrix_rows <= 0 || cfg.matrix_cols <= 0) throw ConfigError("mvm.matrix_rows/matrix_cols must be > 0");
  if (cfg.weight_bits < (cfg.signed_weights ? 2 : 1) || cfg.input_bits < 1)
    throw ConfigError("mapping.weight_bits/input_bits too small");
  std::mt19937_64 rng(cfg.seed);
  const int hw_bits = cfg.signed_weights ? cfg.weight_bits - 1 : cfg.weight_bits;
  const int wmax = (1 << hw_bits) - 1;
  std::uniform_int_distribution<int> wdist(cfg.signed_weights ? -wmax : 0, wmax);
  std::uniform_int_distribution<int> xdist(0, (1 << cfg.input_bits) - 1);
  const Eigen::MatrixXi weights =
      Eigen::MatrixXi::NullaryExpr(cfg.matrix_rows, cfg.matrix_cols, [&] { return wdist(rng); });
  const Eigen::VectorXi inputs = Eigen::VectorXi::NullaryExpr(cfg.matrix_rows, [&] { return xdist(rng); });
  const Eigen::MatrixXi phys = cfg.signed_weights ? differential_split(weights) : weights;

  const HardwareConfig hw = cfg.hardware();
  const MvmPlan plan = make_plan(static_cast<int>(phys.rows()), static_cast<int>(phys.cols()), hw.crossbar.rows,
                                 hw.crossbar.cols, hw_bits, cfg.input_bits, hw.bit_slice, hw.effective_pwa());
  const MvmHardware hardware =
      program_hardware(plan, phys, hw.profile, hw.crossbar, build_adcs(plan, hw, cfg.seed));
  const MvmOutput result = execute_mvm(hardware, inputs, true);
  const IntVector got = cfg.signed_weights ? differential_combine(result.values) : result.values;
  const IntVector want = integer_mvm(weights, inputs);

  {
    auto os = open_out(inv.out_dir / "mvm.csv");
    os << "column,exact,hardware,error\n";
    for (Eigen::Index j = 0; j < want.size(); ++j)
      os << j << ',' << want[j] << ',' << got[j] << ',' << got[j] - want[j] << '\n';
  }
  {
    auto os = open_out(inv.out_dir / "plan.txt");
    write_plan_summary(os, plan);
  }
  {
    auto os = open_out(inv.out_dir / "cycles.csv");
    os << "cycle,row_tile,col_tile,slice,input_bit,mask_index,weight,max_nf,converged\n";
    int i = 0;
    for (const auto& c : result.diagnostics.cycles)
      os << i++ << ',' << c.step.row_tile << ',' << c.step.col_tile << ',' << c.step.slice << ','
         << c.step.input_bit << ',' << c.step.mask_index << ',' << c.step.weight << ','
         << io::format_double(c.max_nf) << ',' << (c.converged ? 1 : 0) << '\n';
  }
  std::int64_t wrong = 0, worst = 0;
  for (Eigen::Index j = 0; j < want.size(); ++j) {
    wrong += got[j] != want[j];
    worst = std::max<std::int64_t>(worst, std::abs(got[j] - want[j]));
  }
  out << "mvm " << weights.rows() << 'x' << weights.cols() << ": " << wrong << " of " << want.size()
      << " outputs differ from the exact result (max |error| " << worst << "), "
      << result.diagnostics.executed_cycles << " cycles, max NF "
      << io::format_double(result.diagnostics.max_nf) << '\n';
  return kExitOk;
}

// infer: results.csv, predictions.csv
int run_infer(const Invocation& inv, std::ostream& out) {
  const ExperimentConfig& cfg = inv.config;
  require_inference_inputs(cfg);
  const Workload wl = load_workload(cfg.workload);
  const TrainOptions train = cfg.training();
  const QuantizedNetwork net = train_reference(wl, train);
  const HardwareConfig hw = cfg.hardware();
  ExperimentResult r = evaluate(net, wl, hw, cfg.seed, cfg.evaluation());
  r.fingerprint = experiment_fingerprint(cfg.workload, train, hw, cfg.evaluation());
  const std::vector<int> software = software_predict(net, wl.test.features);
  {
    auto os = open_out(inv.out_dir / "results.csv");
    write_results(os, {r});
  }
  {
    auto os = open_out(inv.out_dir / "predictions.csv");
    os << "sample,label,hardware,software\n";
    for (std::size_t i = 0; i < r.predictions.size(); ++i)
      os << i << ',' << wl.test.labels[static_cast<Eigen::Index>(i)] << ',' << r.predictions[i] << ','
         << software[i] << '\n';
  }
  out << "infer " << cfg.workload << " on " << hw.profile.name << ' ' << hw.crossbar.rows << 'x'
      << hw.crossbar.cols << ": accuracy " << io::format_double(r.accuracy) << " (software "
      << io::format_double(r.baseline_accuracy) << ") over " << r.samples << " samples\n";
  return kExitOk;
}

std::vector<SweepTask> sweep_tasks(const ExperimentConfig& cfg) {
  const SweepGrid& g = cfg.grid;
  auto or_one = [](const auto& axis, auto fallback) {
    using T = typename std::decay_t<decltype(axis)>::value_type;
    return axis.empty() ? std::vector<T>{static_cast<T>(fallback)} : axis;
  };
  const auto techs = g.techs.empty() ? std::vector<std::string>{} : g.techs;
  const auto arrays = g.arrays;
  const auto wires = or_one(g.wires, cfg.crossbar.wire_res_per_gp);
  const auto slices = or_one(g.bit_slices, cfg.bit_slice);
  const auto pwas = or_one(g.pwa_groups, cfg.pwa_group);
  const auto modes = or_one(g.adc_modes, cfg.adc_mode);
  const auto seeds = or_one(g.seeds, cfg.seed);

  std::vector<SweepTask> tasks;
  const std::size_t n_tech = techs.empty() ? 1 : techs.size();
  const std::size_t n_arr = arrays.empty() ? 1 : arrays.size();
  for (std::size_t t = 0; t < n_tech; ++t)
    for (std::size_t a = 0; a < n_arr; ++a)
      for (double wire : wires)
        for (int bs : slices)
          for (int pwa : pwas)
            for (AdcMode mode : modes)
              for (std::uint64_t seed : seeds) {
                ExperimentConfig c = cfg;
                // A swept technology starts from its built-in profile.
                if (!techs.empty()) apply_assignments(c, {{"profile.tech", techs[t]}});
                if (!arrays.empty()) c.crossbar.rows = c.crossbar.cols = arrays[a];
                c.crossbar.wire_res_per_gp = wire;
                c.bit_slice = bs;
                c.pwa_group = pwa >= c.crossbar.rows ? 0 : pwa;
                c.adc_mode = mode;
                c.seed = seed;
                SweepTask task;
                task.workload = c.workload;
                task.train = c.training();
                task.hw = c.hardware();
                task.eval = c.evaluation();
                tasks.push_back(std::move(task));
              }
  return tasks;
}

// sweep: results.csv, resumable; rows follow grid order.
int run_sweep(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const ExperimentConfig& cfg = inv.config;
  require_inference_inputs(cfg);
  const fs::path results_path = cfg.results_path.empty() ? inv.out_dir / "results.csv" : fs::path(cfg.results_path);
  if (results_path.has_parent_path()) ensure_dir(results_path.parent_path());
  const auto tasks = sweep_tasks(cfg);

  std::vector<ExperimentResult> done;
  if (fs::exists(results_path)) {
    auto is = open_in(results_path.string(), "results");
    done = read_results(is);
  }
  std::vector<std::string> order;
  for (const auto& t : tasks) order.push_back(experiment_fingerprint(t.workload, t.train, t.hw, t.eval));

  // Everything known so far, flushed after each result so an interrupted
  // sweep resumes where it stopped.
  std::map<std::string, ExperimentResult> known;
  for (const auto& r : done) known[r.fingerprint] = r;
  auto flush = [&] {
    std::vector<ExperimentResult> rows;
    for (const auto& fp : order)
      if (auto it = known.find(fp); it != known.end()) rows.push_back(it->second);
    write_atomically(results_path, [&](std::ostream& os) { write_results(os, rows); });
  };
  int fresh = 0;
  const int workers = cfg.workers > 0 ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  const auto results = sweep(
      tasks, done,
      [&](const ExperimentResult& r) {
        known[r.fingerprint] = r;
        ++fresh;
        flush();
        out << '[' << fresh << "] " << r.profile << ' ' << r.rows << 'x' << r.cols << " pwa " << r.pwa_group
            << " bs " << r.bit_slice << ' ' << to_string(r.adc_mode) << " seed " << r.seed << ": "
            << (r.status == "ok" ? io::format_double(r.accuracy) : r.status) << '\n';
      },
      default_data_dir(), workers);
  write_atomically(results_path, [&](std::ostream& os) { write_results(os, results); });

  int failed = 0;
  for (const auto& r : results) failed += r.status != "ok";
  out << "sweep: " << results.size() << " results (" << results.size() - fresh << " reused, " << failed
      << " failed) in " << results_path.string() << '\n';
  if (failed > 0) {
    err << "error: " << failed << " experiment(s) failed; see the status column\n";
    return kExitFailure;
  }
  return kExitOk;
}

// report: report_<kind>.csv plus the table on stdout
int run_report(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const ExperimentConfig& cfg = inv.config;
  const std::string path = cfg.results_path.empty() ? (inv.out_dir / "results.csv").string() : cfg.results_path;
  auto is = open_in(path, "results");
  const auto results = read_results(is);
  if (results.empty()) throw std::runtime_error("results file '" + path + "' has no results");
  const ReportTable table = make_report(results, cfg.report_kind);
  {
    auto os = open_out(inv.out_dir / ("report_" + cfg.report_kind + ".csv"));
    write_report_csv(os, table);
  }
  write_report_text(out, table);
  if (const int gaps = table.missing_cells(); gaps > 0) {
    err << "error: " << gaps << " cell(s) have no results (marked --)\n";
    return kExitIncomplete;
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Crossbar in-memory computing simulator"};
  app.name("xbarsim");
  app.require_subcommand(1, 1);

  struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
    std::vector<std::string> grid;
    std::map<std::string, std::string> flags;  // config key -> value
  };
  std::map<std::string, Common> common;
  std::map<std::string, CLI::App*> subs;
  static const std::map<std::string, std::string> descriptions = {
      {"characterize", "sample an array and write its per-state current table"},
      {"ladder", "build ADC references from a characterization table"},
      {"mvm", "run one random matrix-vector product through the pipeline"},
      {"infer", "train, quantize and evaluate a network on simulated hardware"},
      {"sweep", "run a grid of inference experiments into a results file"},
      {"report", "pivot a results file into an accuracy table"}};
  for (const auto& [name, flags] : subcommand_flags()) {
    CLI::App* sub = app.add_subcommand(name, descriptions.at(name));
    Common& c = common[name];
    sub->add_option("--config", c.config, "INI config file")->check(CLI::ExistingFile);
    sub->add_option("--set", c.sets, "override, section.key=value (repeatable)");
    sub->add_option("--out", c.out, std::string("output directory (default $") + kOutputDirEnv + " or xbarsim_out)");
    for (const auto& f : flags) sub->add_option(f.name, c.flags[f.key], f.help + " [" + f.key + "]");
    if (name == "sweep")
      sub->add_option("--grid", c.grid, "axis=v1,v2,... with axis in arrays, techs, pwa, adc, bit_slices, wires, seeds");
    subs[name] = sub;
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << e.what() << '\n';
      return kExitOk;
    }
    err << "error: " << e.what() << '\n' << "run with --help for usage\n";
    return kExitConfig;
  }

  Invocation inv;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) inv.subcommand = name;
  const Common& c = common.at(inv.subcommand);
  try {
    // Precedence: defaults < config file < --set < dedicated flags.
    if (!c.config.empty()) apply_assignments(inv.config, read_config_file(c.config));
    std::vector<Assignment> sets;
    for (const auto& s : c.sets) sets.push_back(split_assignment(s, "--set"));
    apply_assignments(inv.config, sets);
    std::vector<Assignment> flags;
    for (const auto& f : subcommand_flags().at(inv.subcommand))
      if (subs.at(inv.subcommand)->count(f.name) > 0) flags.emplace_back(f.key, c.flags.at(f.key));
    for (const auto& g : c.grid) {
      const auto [axis, values] = split_assignment(g, "--grid");
      const auto it = kGridAxes.find(axis);
      if (it == kGridAxes.end()) throw ConfigError("--grid: unknown axis '" + axis + "'");
      flags.emplace_back(it->second, values);
    }
    apply_assignments(inv.config, flags);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  if (!c.out.empty()) {
    inv.out_dir = c.out;
  } else if (const char* env = std::getenv(kOutputDirEnv); env && *env) {
    inv.out_dir = env;
  } else {
    inv.out_dir = "xbarsim_out";
  }

  try {
    ensure_dir(inv.out_dir);
    write_resolved_config(inv);
    if (inv.subcommand == "characterize") return run_characterize(inv, out);
    if (inv.subcommand == "ladder") return run_ladder(inv, out, err);
    if (inv.subcommand == "mvm") return run_mvm(inv, out);
    if (inv.subcommand == "infer") return run_infer(inv, out);
    if (inv.subcommand == "sweep") return run_sweep(inv, out, err);
    return run_report(inv, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace xbar
