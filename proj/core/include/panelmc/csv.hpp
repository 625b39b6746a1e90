#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace panelmc::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(std::string_view name) const;  // -1 when absent
};

// Comma-separated, first row is the header. Fields are taken verbatim
// (no quoting layer); numeric parsing is locale-independent.
Table read_file(const std::string& path);
Table parse(std::string_view text);

void write_file(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows);

// Locale-independent double formatting (shortest round-trip) and parsing.
std::string format_double(double v);
double parse_double(std::string_view field, const std::string& module,
                    const std::string& context);
bool try_parse_double(std::string_view field, double& out);
bool try_parse_long(std::string_view field, long& out);

}  // namespace panelmc::csv
