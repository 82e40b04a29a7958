#include "xbar/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <stdexcept>

#include "xbar/io.hpp"

namespace xbar {

namespace {

using Knobs = std::map<std::string, std::string>;

Knobs knobs_of(const ExperimentResult& r) {
  return {{"workload", r.workload},
          {"rows", std::to_string(r.rows)},
          {"wire_res_per_gp_ohm", io::format_double(r.wire_res_per_gp)},
          {"bit_slice", std::to_string(r.bit_slice)},
          {"pwa_group", r.pwa_group == r.rows ? std::string("fwa") : std::to_string(r.pwa_group)},
          {"adc_mode", std::string(to_string(r.adc_mode))}};
}

std::string primary_knob(const std::string& kind) {
  if (kind == "array-size") return "rows";
  if (kind == "pwa") return "pwa_group";
  if (kind == "bit-slice") return "bit_slice";
  if (kind == "wire") return "wire_res_per_gp_ohm";
  if (kind == "adc") return "";
  throw std::invalid_argument("unknown report kind '" + kind + "'");
}

template <typename T>
int index_of(std::vector<T>& xs, const T& x) {
  auto it = std::find(xs.begin(), xs.end(), x);
  if (it != xs.end()) return static_cast<int>(it - xs.begin());
  xs.push_back(x);
  return static_cast<int>(xs.size() - 1);
}

std::string fmt(double v, const char* spec) {
  char buf[32];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

int ReportTable::missing_cells() const {
  int n = 0;
  for (const auto& row : cells)
    for (const auto& c : row) n += !c.has_value();
  return n;
}

ReportTable make_report(const std::vector<ExperimentResult>& results, const std::string& kind) {
  const std::string primary = primary_knob(kind);
  std::vector<const ExperimentResult*> ok;
  for (const auto& r : results)
    if (r.status == "ok") ok.push_back(&r);
  if (ok.empty()) throw std::runtime_error("no successful results to report");

  // Knobs that vary get folded into the row label.
  std::vector<std::string> varying;
  const Knobs first = knobs_of(*ok.front());
  for (const auto& [key, value] : first) {
    if (key == primary || (key == "adc_mode" && kind == "adc")) continue;
    for (const auto* r : ok)
      if (knobs_of(*r).at(key) != value) {
        varying.push_back(key);
        break;
      }
  }

  ReportTable t;
  t.kind = kind;
  t.row_header = primary.empty() ? "config" : primary;
  for (const auto& k : varying) t.row_header += "|" + k;
  std::map<std::pair<int, int>, std::vector<double>> acc;
  for (const auto* r : ok) {
    const Knobs k = knobs_of(*r);
    std::string label = primary.empty() ? std::string() : k.at(primary);
    for (const auto& v : varying) label += (label.empty() ? "" : "|") + k.at(v);
    if (label.empty()) label = "all";
    const std::string column = kind == "adc" ? r->profile + "/" + k.at("adc_mode") : r->profile;
    const int ri = index_of(t.rows, label);
    if (kind == "adc") {
      // Both modes always get a column, so a missing one shows as a gap.
      index_of(t.columns, r->profile + "/linear");
      index_of(t.columns, r->profile + "/custom");
    }
    const int ci = index_of(t.columns, column);
    acc[{ri, ci}].push_back(r->accuracy);
  }
  t.cells.assign(t.rows.size(), std::vector<std::optional<CellStats>>(t.columns.size()));
  for (const auto& [pos, xs] : acc) {
    CellStats c;
    c.n = static_cast<int>(xs.size());
    for (double x : xs) c.mean += x;
    c.mean /= c.n;
    if (c.n > 1) {
      double ss = 0.0;
      for (double x : xs) ss += (x - c.mean) * (x - c.mean);
      c.stddev = std::sqrt(ss / (c.n - 1));
    }
    t.cells[pos.first][pos.second] = c;
  }
  return t;
}

void write_report_csv(std::ostream& os, const ReportTable& t) {
  os << t.row_header;
  for (const auto& c : t.columns) os << ',' << c << "_mean_accuracy," << c << "_std_accuracy," << c << "_n";
  os << '\n';
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    os << t.rows[r];
    for (const auto& cell : t.cells[r]) {
      if (cell)
        os << ',' << io::format_double(cell->mean) << ',' << io::format_double(cell->stddev) << ','
           << cell->n;
      else
        os << ",--,--,0";
    }
    os << '\n';
  }
}

void write_report_text(std::ostream& os, const ReportTable& t) {
  std::vector<std::vector<std::string>> grid;
  grid.push_back({t.row_header});
  for (const auto& c : t.columns) grid[0].push_back(c);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    std::vector<std::string> line{t.rows[r]};
    for (const auto& cell : t.cells[r])
      line.push_back(cell ? fmt(cell->mean, "%.4f") + " ± " + fmt(cell->stddev, "%.4f") : "--");
    grid.push_back(std::move(line));
  }
  std::vector<std::size_t> width(grid[0].size(), 0);
  for (const auto& line : grid)
    for (std::size_t c = 0; c < line.size(); ++c) {
      // "±" is two bytes but one column wide.
      const std::size_t len = line[c].size() - (line[c].find("±") != std::string::npos ? 1 : 0);
      width[c] = std::max(width[c], len);
    }
  for (const auto& line : grid) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      const std::size_t len = line[c].size() - (line[c].find("±") != std::string::npos ? 1 : 0);
      os << line[c] << std::string(width[c] - len + 2, ' ');
    }
    os << '\n';
  }
}

}  // namespace xbar
