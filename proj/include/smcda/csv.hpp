#pragma once

#include <string>
#include <vector>

namespace smcda {

/// Minimal CSV table used for all emitted artifacts.  Numbers are written
/// with round-trip precision ("%.17g") so parse(emit(x)) == x exactly.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void write(const std::string& path) const;
  static CsvTable read(const std::string& path);

  int column(const std::string& name) const;  // -1 when absent
};

std::string format_double(double v);
double parse_double(const std::string& s);

}  // namespace smcda
