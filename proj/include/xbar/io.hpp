#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace xbar::io {

// Shortest round-trip representation; "nan" for NaN.
std::string format_double(double v);
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, char sep);

// Lines of the form "# key=value" preceding a delimited table.
using Metadata = std::map<std::string, std::string>;
void parse_metadata_line(std::string_view line, Metadata& meta);
const std::string& require(const Metadata& meta, const std::string& key);

}  // namespace xbar::io
