#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "xbar/inference.hpp"

namespace xbar {

struct CellStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over seeds; 0 for one seed
  int n = 0;
};

// Rows are values of one knob (plus any other knob that varies in the
// results, so configurations never get averaged together); columns are
// technologies, or technology/ADC-mode pairs for the "adc" kind.
struct ReportTable {
  std::string kind;
  std::string row_header;
  std::vector<std::string> rows;
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<CellStats>>> cells;  // [row][column]

  int missing_cells() const;
};

/// kind: array-size, pwa, adc, bit-slice or wire. Only results with status
/// "ok" count; throws if none are usable.
ReportTable make_report(const std::vector<ExperimentResult>& results, const std::string& kind);

void write_report_csv(std::ostream& os, const ReportTable& table);
void write_report_text(std::ostream& os, const ReportTable& table);

}  // namespace xbar
