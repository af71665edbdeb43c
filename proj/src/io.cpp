#include "fplap/io.hpp"

#include "fplap/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fpl {

std::uint64_t fnv1a64(std::string_view bytes)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes)
    {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  return h;
}

std::string hash_hex(std::uint64_t h)
{
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream &out, const CsvTable &table)
{
  out << "# config_hash=" << table.config_hash << '\n';
  for (std::size_t j = 0; j < table.header.size(); ++j)
    out << (j ? "," : "") << table.header[j];
  out << '\n';
  for (const auto &row : table.rows)
    {
      for (std::size_t j = 0; j < row.size(); ++j)
        out << (j ? "," : "") << format_double(row[j]);
      out << '\n';
    }
}

void write_csv(const std::filesystem::path &file, const CsvTable &table)
{
  std::ofstream out(file, std::ios::binary);
  if (!out)
    throw Error("cannot open " + file.string() + " for writing");
  write_csv(out, table);
}

namespace {

std::vector<std::string> split(const std::string &line)
{
  std::vector<std::string> out;
  std::stringstream        ss(line);
  std::string              cell;
  while (std::getline(ss, cell, ','))
    out.push_back(cell);
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

std::string trim(std::string s)
{
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

} // namespace

CsvTable read_csv(std::istream &in)
{
  CsvTable    table;
  std::string line;
  int         lineno = 0;
  while (std::getline(in, line))
    {
      ++lineno;
      line = trim(line);
      if (line.empty())
        continue;
      if (line[0] == '#')
        {
          const std::string key = "# config_hash=";
          if (line.rfind(key, 0) == 0)
            table.config_hash = line.substr(key.size());
          continue;
        }
      auto cells = split(line);
      if (table.header.empty())
        {
          for (auto &c : cells)
            table.header.push_back(trim(c));
          continue;
        }
      if (cells.size() != table.header.size())
        throw ValidationError("csv line " + std::to_string(lineno) + ": expected " +
                              std::to_string(table.header.size()) + " fields");
      std::vector<double> row;
      for (auto &c : cells)
        {
          const std::string t = trim(c);
          double            v = 0.;
          const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
          if (ec != std::errc() || ptr != t.data() + t.size())
            throw ValidationError("csv line " + std::to_string(lineno) + ": not a number: '" + t + "'");
          row.push_back(v);
        }
      table.rows.push_back(std::move(row));
    }
  if (table.header.empty())
    throw ValidationError("csv: missing header row");
  return table;
}

CsvTable read_csv(const std::filesystem::path &file)
{
  std::ifstream in(file);
  if (!in)
    throw ValidationError("cannot open " + file.string());
  return read_csv(in);
}

std::vector<double> column(const CsvTable &table, const std::string &name)
{
  for (std::size_t j = 0; j < table.header.size(); ++j)
    if (table.header[j] == name)
      {
        std::vector<double> out;
        out.reserve(table.rows.size());
        for (const auto &row : table.rows)
          out.push_back(row[j]);
        return out;
      }
  throw ValidationError("csv: no column named '" + name + "'");
}

Vector read_grid_function(const std::filesystem::path &file, const Domain1D &domain)
{
  const CsvTable table = read_csv(file);
  const auto     x     = column(table, "x");
  const auto     u     = column(table, "u");
  if (static_cast<int>(x.size()) != domain.size())
    throw ValidationError("grid function has " + std::to_string(x.size()) + " nodes, the configured grid has " +
                          std::to_string(domain.size()));
  Vector out(domain.size());
  for (int i = 0; i < domain.size(); ++i)
    {
      if (std::abs(x[i] - domain.node(i)) > 1e-12 * std::max(1., domain.length()))
        throw ValidationError("grid function node " + std::to_string(i) + " does not match the configured grid");
      out[i] = u[i];
    }
  return out;
}

} // namespace fpl
