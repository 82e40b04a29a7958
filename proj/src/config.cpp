#include "xbar/config.hpp"

#include <algorithm>
#include <functional>
#include <ostream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "xbar/io.hpp"

namespace xbar {

namespace {

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

int to_int(const std::string& v) { return static_cast<int>(io::parse_int(v)); }

std::uint64_t to_seed(const std::string& v) {
  const long long s = io::parse_int(v);
  if (s < 0) throw std::invalid_argument("seed must be >= 0");
  return static_cast<std::uint64_t>(s);
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected true or false, got '" + v + "'");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

template <typename T, typename F>
std::vector<T> list_of(const std::string& v, F parse) {
  std::vector<T> out;
  if (io::trim(v).empty()) return out;
  for (const auto& item : io::split(v, ',')) out.push_back(parse(std::string(io::trim(item))));
  return out;
}

template <typename T, typename F>
std::string join_list(const std::vector<T>& xs, F fmt) {
  std::vector<std::string> parts;
  for (const auto& x : xs) parts.push_back(fmt(x));
  return io::join(parts, ',');
}

std::string str_int(long long v) { return std::to_string(v); }

std::vector<std::string> tech_list(const std::string& v) {
  if (io::trim(v) == "all") {
    std::vector<std::string> names;
    for (const auto& p : builtin_profiles()) names.push_back(p.name);
    return names;
  }
  auto names = list_of<std::string>(v, [](const std::string& s) { return s; });
  for (const auto& n : names) builtin_profile(n);  // validates
  return names;
}

#define XBAR_NUM(KEY, MEMBER, PARSE, FORMAT)                                             \
  Field {                                                                                \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = PARSE(v); },         \
        [](const ExperimentConfig& c) { return FORMAT(c.MEMBER); }                       \
  }

const std::vector<Field>& fields() {
  using io::format_double;
  using io::parse_double;
  static const std::vector<Field> table = {
      {"profile.tech",
       [](ExperimentConfig& c, const std::string& v) {
         c.profile = builtin_profile(v);
         c.tech = v;
       },
       [](const ExperimentConfig& c) { return c.tech; }},
      XBAR_NUM("profile.g_on_S", profile.g_on, parse_double, format_double),
      XBAR_NUM("profile.ratio_hrs", profile.ratio_hrs, parse_double, format_double),
      XBAR_NUM("profile.ratio_off", profile.ratio_off, parse_double, format_double),
      XBAR_NUM("profile.cell_height_gp", profile.cell_height_gp, parse_double, format_double),
      {"profile.topology",
       [](ExperimentConfig& c, const std::string& v) { c.profile.topology = parse_topology(v); },
       [](const ExperimentConfig& c) { return std::string(to_string(c.profile.topology)); }},
      XBAR_NUM("profile.alpha", profile.degeneration.alpha, parse_double, format_double),
      XBAR_NUM("profile.v_sat_V", profile.degeneration.v_sat, parse_double, format_double),
      XBAR_NUM("profile.max_levels", profile.max_levels, to_int, str_int),
      {"profile.input_mode",
       [](ExperimentConfig& c, const std::string& v) { c.profile.input_mode = parse_input_mode(v); },
       [](const ExperimentConfig& c) { return std::string(to_string(c.profile.input_mode)); }},

      XBAR_NUM("crossbar.rows", crossbar.rows, to_int, str_int),
      XBAR_NUM("crossbar.cols", crossbar.cols, to_int, str_int),
      XBAR_NUM("crossbar.wire_res_per_gp_ohm", crossbar.wire_res_per_gp, parse_double, format_double),
      XBAR_NUM("crossbar.driver_res_ohm", crossbar.driver_res, parse_double, format_double),
      XBAR_NUM("crossbar.sink_res_ohm", crossbar.sink_res, parse_double, format_double),
      XBAR_NUM("crossbar.v_read_V", crossbar.v_read, parse_double, format_double),
      XBAR_NUM("crossbar.dummy_column", crossbar.dummy_column, to_bool, from_bool),
      XBAR_NUM("crossbar.tol_V", crossbar.tol_v, parse_double, format_double),
      XBAR_NUM("crossbar.max_iters", crossbar.max_iters, to_int, str_int),

      XBAR_NUM("mapping.bit_slice", bit_slice, to_int, str_int),
      XBAR_NUM("mapping.pwa_group", pwa_group, to_int, str_int),
      XBAR_NUM("mapping.weight_bits", weight_bits, to_int, str_int),
      XBAR_NUM("mapping.input_bits", input_bits, to_int, str_int),

      {"adc.mode", [](ExperimentConfig& c, const std::string& v) { c.adc_mode = parse_adc_mode(v); },
       [](const ExperimentConfig& c) { return std::string(to_string(c.adc_mode)); }},

      XBAR_NUM("sampler.density_in", sampler.density_in, parse_double, format_double),
      XBAR_NUM("sampler.density_w", sampler.density_w, parse_double, format_double),
      XBAR_NUM("sampler.n_per_state", sampler.n_per_state, to_int, str_int),

      XBAR_NUM("characterize.active_rows", active_rows, to_int, str_int),
      XBAR_NUM("characterize.mask_begin", mask_begin, to_int, str_int),

      XBAR_NUM("mvm.matrix_rows", matrix_rows, to_int, str_int),
      XBAR_NUM("mvm.matrix_cols", matrix_cols, to_int, str_int),
      XBAR_NUM("mvm.signed", signed_weights, to_bool, from_bool),

      {"workload.name",
       [](ExperimentConfig& c, const std::string& v) {
         if (v != "digits8x8" && v != "synthetic-deep") throw std::invalid_argument("unknown workload '" + v + "'");
         c.workload = v;
       },
       [](const ExperimentConfig& c) { return c.workload; }},
      {"workload.hidden",
       [](ExperimentConfig& c, const std::string& v) { c.hidden = list_of<int>(v, to_int); },
       [](const ExperimentConfig& c) { return join_list(c.hidden, str_int); }},
      XBAR_NUM("workload.epochs", epochs, to_int, str_int),
      XBAR_NUM("workload.max_test_samples", max_test_samples, to_int, str_int),

      {"run.seed", [](ExperimentConfig& c, const std::string& v) { c.seed = to_seed(v); },
       [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      XBAR_NUM("run.workers", workers, to_int, str_int),

      {"sweep.arrays", [](ExperimentConfig& c, const std::string& v) { c.grid.arrays = list_of<int>(v, to_int); },
       [](const ExperimentConfig& c) { return join_list(c.grid.arrays, str_int); }},
      {"sweep.techs", [](ExperimentConfig& c, const std::string& v) { c.grid.techs = tech_list(v); },
       [](const ExperimentConfig& c) { return io::join(c.grid.techs, ','); }},
      {"sweep.pwa_groups",
       [](ExperimentConfig& c, const std::string& v) { c.grid.pwa_groups = list_of<int>(v, to_int); },
       [](const ExperimentConfig& c) { return join_list(c.grid.pwa_groups, str_int); }},
      {"sweep.adc_modes",
       [](ExperimentConfig& c, const std::string& v) {
         c.grid.adc_modes = list_of<AdcMode>(v, [](const std::string& s) { return parse_adc_mode(s); });
       },
       [](const ExperimentConfig& c) {
         return join_list(c.grid.adc_modes, [](AdcMode m) { return std::string(to_string(m)); });
       }},
      {"sweep.bit_slices",
       [](ExperimentConfig& c, const std::string& v) { c.grid.bit_slices = list_of<int>(v, to_int); },
       [](const ExperimentConfig& c) { return join_list(c.grid.bit_slices, str_int); }},
      {"sweep.wires_ohm",
       [](ExperimentConfig& c, const std::string& v) {
         c.grid.wires = list_of<double>(v, [](const std::string& s) { return io::parse_double(s); });
       },
       [](const ExperimentConfig& c) { return join_list(c.grid.wires, io::format_double); }},
      {"sweep.seeds", [](ExperimentConfig& c, const std::string& v) { c.grid.seeds = list_of<std::uint64_t>(v, to_seed); },
       [](const ExperimentConfig& c) {
         return join_list(c.grid.seeds, [](std::uint64_t s) { return std::to_string(s); });
       }},

      {"io.table", [](ExperimentConfig& c, const std::string& v) { c.table_path = v; },
       [](const ExperimentConfig& c) { return c.table_path; }},
      {"io.results", [](ExperimentConfig& c, const std::string& v) { c.results_path = v; },
       [](const ExperimentConfig& c) { return c.results_path; }},
      {"report.kind",
       [](ExperimentConfig& c, const std::string& v) {
         static const std::vector<std::string> kinds{"array-size", "pwa", "adc", "bit-slice", "wire"};
         if (std::find(kinds.begin(), kinds.end(), v) == kinds.end())
           throw std::invalid_argument("unknown report kind '" + v + "'");
         c.report_kind = v;
       },
       [](const ExperimentConfig& c) { return c.report_kind; }},
  };
  return table;
}

#undef XBAR_NUM

const Field& field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

HardwareConfig ExperimentConfig::hardware() const {
  HardwareConfig hw;
  hw.profile = profile;
  hw.crossbar = crossbar;
  hw.pwa_group = pwa_group;
  hw.bit_slice = bit_slice;
  hw.adc_mode = adc_mode;
  hw.sampler = sampler;
  hw.sampler.seed = seed;
  return hw;
}

TrainOptions ExperimentConfig::training() const {
  TrainOptions t;
  t.hidden = hidden;
  t.weight_bits = weight_bits;
  t.epochs = epochs;
  t.seed = seed;
  return t;
}

EvalOptions ExperimentConfig::evaluation() const {
  EvalOptions e;
  e.max_test_samples = max_test_samples;
  return e;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void apply_assignments(ExperimentConfig& cfg, std::vector<Assignment> assignments) {
  std::stable_partition(assignments.begin(), assignments.end(),
                        [](const Assignment& a) { return a.first == "profile.tech"; });
  for (const auto& [key, value] : assignments) {
    const Field& f = field(key);
    try {
      f.set(cfg, std::string(io::trim(value)));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }
}

std::vector<Assignment> read_config_file(const std::string& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  std::vector<Assignment> out;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(path + ": key '" + section + "' outside any section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      field(full);  // rejects unknown keys before anything is applied
      out.emplace_back(full, value.get_value<std::string>());
    }
  }
  return out;
}

std::string get_value(const ExperimentConfig& cfg, const std::string& key) {
  return field(key).get(cfg);
}

void write_config(std::ostream& os, const ExperimentConfig& cfg) {
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string s = f.key.substr(0, dot);
    if (s != section) {
      if (!section.empty()) os << '\n';
      os << '[' << s << "]\n";
      section = s;
    }
    os << f.key.substr(dot + 1) << " = " << f.get(cfg) << '\n';
  }
}

}  // namespace xbar
