#include "xbar/characterize.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include "xbar/adc.hpp"
#include "xbar/io.hpp"

namespace xbar {

std::optional<double> non_ideality_factor(double i_ideal, double i_nonideal) {
  if (i_ideal == 0.0) return std::nullopt;
  return std::abs((i_ideal - i_nonideal) / i_ideal);
}

std::optional<double> sense_margin(const CharacterizationTable& table, int x) {
  if (x < 1 || x > table.x_max()) return std::nullopt;
  const auto& hi = table.states[x];
  const auto& lo = table.states[x - 1];
  if (!hi.present() || !lo.present()) return std::nullopt;
  return (hi.i_min - lo.i_max) / 2.0;
}

MetricsReport summarize(const CharacterizationTable& table, const std::vector<double>& nf_values) {
  MetricsReport rep;
  rep.sense_margins.resize(table.states.size());
  bool any = false;
  for (int x = 1; x <= table.x_max(); ++x) {
    rep.sense_margins[x] = sense_margin(table, x);
    if (!rep.sense_margins[x]) continue;
    const double sm = *rep.sense_margins[x];
    rep.min_sense_margin = any ? std::min(rep.min_sense_margin, sm) : sm;
    any = true;
    if (sm < 0.0 && !rep.first_negative_state) rep.first_negative_state = x;
  }
  for (double nf : nf_values) rep.max_nf = std::max(rep.max_nf, nf);
  return rep;
}

int max_state(int active_rows, int bit_slice) { return active_rows * ((1 << bit_slice) - 1); }

namespace {

struct Resolved {
  int active_rows;
  int levels;  // highest weight level
  BitVector mask;
};

Resolved resolve(const CharacterizationSpec& spec) {
  spec.profile.validate();
  spec.config.validate();
  if (spec.bit_slice != 1 && spec.bit_slice != 2)
    throw std::invalid_argument("bit slice must be 1 or 2");
  const int rows = spec.config.rows;
  const int active = spec.active_rows == 0 ? rows : spec.active_rows;
  if (active < 1 || spec.mask_begin < 0 || spec.mask_begin + active > rows)
    throw std::invalid_argument("active row block exceeds the array");
  if (spec.sampler.n_per_state < 1) throw std::invalid_argument("n_per_state must be >= 1");
  return {active, (1 << spec.bit_slice) - 1, range_mask(rows, spec.mask_begin, spec.mask_begin + active)};
}

// The measured column plus (optionally) its dummy; other columns carry no
// shared conductive path and do not affect the measured current.
CharacterizationSample measure(const CharacterizationSpec& spec, const Resolved& r,
                               const Eigen::VectorXi& weights, const BitVector& inputs, int state) {
  CrossbarConfig cfg = spec.config;
  cfg.cols = 1;
  const CrossbarInstance inst = build_crossbar(spec.profile, cfg, weights, spec.bit_slice);
  const SolveResult res = solve(inst, inputs, r.mask);
  const Eigen::VectorXd ideal = ideal_currents(inst, inputs, r.mask);
  CharacterizationSample s;
  s.state = state;
  s.raw_current = res.sl_currents[0];
  s.ideal_current = ideal[0];
  s.current = inst.has_dummy() ? dummy_subtract(res.sl_currents[0], res.sl_currents[inst.dummy_index()])
                               : res.sl_currents[0];
  return s;
}

}  // namespace

std::vector<CharacterizationSample> sample_states(const CharacterizationSpec& spec) {
  const Resolved r = resolve(spec);
  const int rows = spec.config.rows;
  const int x_max = max_state(r.active_rows, spec.bit_slice);
  const auto& sp = spec.sampler;
  std::vector<CharacterizationSample> out;
  out.reserve(static_cast<std::size_t>(x_max + 1) * sp.n_per_state);

  std::vector<int> active_rows(r.active_rows);
  for (int k = 0; k < r.active_rows; ++k) active_rows[k] = spec.mask_begin + k;

  for (int x = 0; x <= x_max; ++x) {
    std::seed_seq seq{static_cast<std::uint32_t>(sp.seed & 0xffffffffu),
                      static_cast<std::uint32_t>(sp.seed >> 32), static_cast<std::uint32_t>(x)};
    std::mt19937_64 rng(seq);
    std::bernoulli_distribution draw_in(sp.density_in);
    std::bernoulli_distribution draw_w(sp.density_w);
    std::uniform_int_distribution<int> draw_level(1, r.levels);

    for (int n = 0; n < sp.n_per_state; ++n) {
      Eigen::VectorXi weights = Eigen::VectorXi::Zero(rows);
      BitVector inputs = BitVector::Zero(rows);
      std::vector<char> contributing(rows, 0);

      // Split x into `cells` levels in [1, L] on randomly chosen active rows.
      const int lo = (x + r.levels - 1) / r.levels;
      const int hi = std::min(x, r.active_rows);
      const int cells = x == 0 ? 0 : std::uniform_int_distribution<int>(lo, hi)(rng);
      std::vector<int> order = active_rows;
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<int> level(cells, 1);
      for (int extra = x - cells; extra > 0; --extra) {
        int k;
        do {
          k = std::uniform_int_distribution<int>(0, cells - 1)(rng);
        } while (level[k] == r.levels);
        ++level[k];
      }
      for (int c = 0; c < cells; ++c) {
        weights[order[c]] = level[c];
        inputs[order[c]] = 1;
        contributing[order[c]] = 1;
      }
      for (int i = 0; i < rows; ++i) {
        if (contributing[i]) continue;
        const bool in_block = i >= spec.mask_begin && i < spec.mask_begin + r.active_rows;
        int in = draw_in(rng) ? 1 : 0;
        int w = draw_w(rng) ? draw_level(rng) : 0;
        // Active non-contributing rows must not add to the product sum.
        for (int tries = 0; in_block && in == 1 && w > 0; ++tries) {
          if (tries == 32) {
            w = 0;
            break;
          }
          in = draw_in(rng) ? 1 : 0;
          w = draw_w(rng) ? draw_level(rng) : 0;
        }
        inputs[i] = in;
        weights[i] = w;
      }
      out.push_back(measure(spec, r, weights, inputs, x));
    }
  }
  return out;
}

std::vector<CharacterizationSample> enumerate_states(const CharacterizationSpec& spec) {
  const Resolved r = resolve(spec);
  const int rows = spec.config.rows;
  const int choices = 2 * (r.levels + 1);  // (input bit, level) per active row
  double total = std::pow(choices, r.active_rows);
  if (total > static_cast<double>(1 << 20))
    throw std::invalid_argument("exhaustive enumeration too large for this array");
  std::vector<CharacterizationSample> out;
  out.reserve(static_cast<std::size_t>(total));
  std::vector<int> digit(r.active_rows, 0);
  while (true) {
    Eigen::VectorXi weights = Eigen::VectorXi::Zero(rows);
    BitVector inputs = BitVector::Zero(rows);
    int state = 0;
    for (int k = 0; k < r.active_rows; ++k) {
      const int row = spec.mask_begin + k;
      inputs[row] = digit[k] % 2;
      weights[row] = digit[k] / 2;
      state += inputs[row] * weights[row];
    }
    out.push_back(measure(spec, r, weights, inputs, state));
    int k = 0;
    while (k < r.active_rows && ++digit[k] == choices) digit[k++] = 0;
    if (k == r.active_rows) break;
  }
  return out;
}

CharacterizationTable build_table(const CharacterizationSpec& spec,
                                  const std::vector<CharacterizationSample>& samples) {
  const Resolved r = resolve(spec);
  CharacterizationTable t;
  t.profile_name = spec.profile.name;
  t.config = spec.config;
  t.bit_slice = spec.bit_slice;
  t.active_rows = r.active_rows;
  t.mask_begin = spec.mask_begin;
  t.sampler = spec.sampler;
  t.unit_current = unit_current(spec.profile, spec.config);
  t.states.assign(max_state(r.active_rows, spec.bit_slice) + 1, StateRange{});
  for (const auto& s : samples) {
    if (s.state < 0 || s.state > t.x_max()) continue;
    auto& st = t.states[s.state];
    if (st.n_samples == 0) {
      st.i_min = st.i_max = s.current;
    } else {
      st.i_min = std::min(st.i_min, s.current);
      st.i_max = std::max(st.i_max, s.current);
    }
    ++st.n_samples;
  }
  return t;
}

CharacterizationTable characterize(const CharacterizationSpec& spec) {
  return build_table(spec, sample_states(spec));
}

void write_table(std::ostream& os, const CharacterizationTable& t) {
  using io::format_double;
  os << "# kind=characterization\n";
  os << "# profile=" << t.profile_name << "\n";
  os << "# rows=" << t.config.rows << "\n";
  os << "# cols=" << t.config.cols << "\n";
  os << "# wire_res_per_gp_ohm=" << format_double(t.config.wire_res_per_gp) << "\n";
  os << "# driver_res_ohm=" << format_double(t.config.driver_res) << "\n";
  os << "# sink_res_ohm=" << format_double(t.config.sink_res) << "\n";
  os << "# v_read_V=" << format_double(t.config.v_read) << "\n";
  os << "# dummy_column=" << (t.config.dummy_column ? 1 : 0) << "\n";
  os << "# bit_slice=" << t.bit_slice << "\n";
  os << "# active_rows=" << t.active_rows << "\n";
  os << "# mask_begin=" << t.mask_begin << "\n";
  os << "# density_in=" << format_double(t.sampler.density_in) << "\n";
  os << "# density_w=" << format_double(t.sampler.density_w) << "\n";
  os << "# n_per_state=" << t.sampler.n_per_state << "\n";
  os << "# seed=" << t.sampler.seed << "\n";
  os << "# unit_current_A=" << format_double(t.unit_current) << "\n";
  os << "state,i_min_A,i_max_A,n\n";
  for (int x = 0; x <= t.x_max(); ++x) {
    const auto& s = t.states[x];
    os << x << ',' << (s.present() ? format_double(s.i_min) : "nan") << ','
       << (s.present() ? format_double(s.i_max) : "nan") << ',' << s.n_samples << '\n';
  }
}

CharacterizationTable read_table(std::istream& is) {
  io::Metadata meta;
  std::string line;
  bool header = false;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    const auto t = io::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      io::parse_metadata_line(t, meta);
      continue;
    }
    if (!header) {
      if (t != "state,i_min_A,i_max_A,n")
        throw std::invalid_argument("characterization table header not recognized");
      header = true;
      continue;
    }
    rows.push_back(io::split(t, ','));
  }
  if (!header) throw std::invalid_argument("characterization table is empty");
  CharacterizationTable tab;
  tab.profile_name = io::require(meta, "profile");
  tab.config.rows = static_cast<int>(io::parse_int(io::require(meta, "rows")));
  tab.config.cols = static_cast<int>(io::parse_int(io::require(meta, "cols")));
  tab.config.wire_res_per_gp = io::parse_double(io::require(meta, "wire_res_per_gp_ohm"));
  tab.config.driver_res = io::parse_double(io::require(meta, "driver_res_ohm"));
  tab.config.sink_res = io::parse_double(io::require(meta, "sink_res_ohm"));
  tab.config.v_read = io::parse_double(io::require(meta, "v_read_V"));
  tab.config.dummy_column = io::parse_int(io::require(meta, "dummy_column")) != 0;
  tab.bit_slice = static_cast<int>(io::parse_int(io::require(meta, "bit_slice")));
  tab.active_rows = static_cast<int>(io::parse_int(io::require(meta, "active_rows")));
  tab.mask_begin = static_cast<int>(io::parse_int(io::require(meta, "mask_begin")));
  tab.sampler.density_in = io::parse_double(io::require(meta, "density_in"));
  tab.sampler.density_w = io::parse_double(io::require(meta, "density_w"));
  tab.sampler.n_per_state = static_cast<int>(io::parse_int(io::require(meta, "n_per_state")));
  tab.sampler.seed = static_cast<std::uint64_t>(io::parse_int(io::require(meta, "seed")));
  tab.unit_current = io::parse_double(io::require(meta, "unit_current_A"));
  tab.states.resize(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& f = rows[k];
    if (f.size() != 4) throw std::invalid_argument("characterization row needs 4 fields");
    if (io::parse_int(f[0]) != static_cast<long long>(k))
      throw std::invalid_argument("characterization states must be consecutive from 0");
    StateRange s;
    s.n_samples = io::parse_int(f[3]);
    if (s.n_samples > 0) {
      s.i_min = io::parse_double(f[1]);
      s.i_max = io::parse_double(f[2]);
      if (s.i_min > s.i_max) throw std::invalid_argument("i_min exceeds i_max");
    }
    tab.states[k] = s;
  }
  if (tab.x_max() != max_state(tab.active_rows, tab.bit_slice))
    throw std::invalid_argument("state count does not match active rows and bit slice");
  return tab;
}

}  // namespace xbar
