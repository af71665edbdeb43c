#pragma once

#include "fplap/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fpl {

std::uint64_t fnv1a64(std::string_view bytes);

/// 16 lowercase hex digits.
std::string hash_hex(std::uint64_t h);

/// Shortest round-trip-safe form with 17 significant digits.
std::string format_double(double v);

/// Comma-separated table with a header row, preceded by "# config_hash=<hex>".
struct CsvTable
{
  std::string                      config_hash;
  std::vector<std::string>         header;
  std::vector<std::vector<double>> rows;
};

void write_csv(std::ostream &out, const CsvTable &table);
void write_csv(const std::filesystem::path &file, const CsvTable &table);

/// Skips lines starting with '#'; the config hash, when present, is kept.
/// Throws ValidationError on ragged rows or unparsable numbers.
CsvTable read_csv(std::istream &in);
CsvTable read_csv(const std::filesystem::path &file);

/// Column lookup by header name; throws ValidationError when absent.
std::vector<double> column(const CsvTable &table, const std::string &name);

/// Reads a grid function from columns x,u and checks that the nodes match the
/// domain to relative 1e-12.
Vector read_grid_function(const std::filesystem::path &file, const Domain1D &domain);

} // namespace fpl
