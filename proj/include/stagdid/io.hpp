#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stagdid/panel.hpp"

namespace stagdid {

// Long-format delimited text. Required header columns: group,time,n,y,d.
// Optional: d_true,s_true. Time must cover 1..T for every group (balanced
// panel); a missing (group,time) cell is a hard error.
struct LoadOptions {
  char delimiter = ',';
  // When set, repeated (group,time) rows are pooled into one cell: sizes add,
  // outcomes combine as size-weighted means. This is how unit-level files
  // (one row per unit, n=1) are ingested. Off by default; duplicates are then
  // an error.
  bool aggregate_duplicates = false;
  // Remedy for observed switches between periods 1 and 2: drop those groups.
  bool drop_initial_switchers = false;
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, delim)) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, const std::string& what, int line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw PanelError("line " + std::to_string(line_no) + ": cannot parse " + what + " '" + s + "'");
  }
}

}  // namespace detail

inline Panel load_panel(const std::string& path, const LoadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw PanelError("cannot open panel file '" + path + "'");

  std::string header;
  if (!std::getline(in, header)) throw PanelError("empty panel file '" + path + "'");
  const auto cols = detail::split_line(header, opts.delimiter);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < cols.size(); ++i) col[cols[i]] = i;
  for (const char* required : {"group", "time", "n", "y", "d"})
    if (!col.count(required))
      throw PanelError("panel file missing required column '" + std::string(required) + "'");
  for (const auto& [name, idx] : col) {
    (void)idx;
    if (name != "group" && name != "time" && name != "n" && name != "y" && name != "d" &&
        name != "d_true" && name != "s_true")
      throw PanelError("unknown column '" + name + "' in panel file");
  }
  const bool has_d_true = col.count("d_true") > 0;
  const bool has_s_true = col.count("s_true") > 0;

  struct Cell {
    std::int64_t n = 0;
    double ny = 0.0;  // n-weighted outcome sum
    double nd_true = 0.0, ns_true = 0.0;
    int d = -1;
  };
  // group id -> time -> cell; std::map keeps group order deterministic
  // (groups are emitted in order of first appearance).
  std::map<std::string, std::map<int, Cell>> data;
  std::vector<std::string> group_order;

  std::string line;
  int line_no = 1;
  int max_time = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_line(line, opts.delimiter);
    if (f.size() != cols.size())
      throw PanelError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(cols.size()) + " fields, got " + std::to_string(f.size()));
    const std::string& gid = f[col["group"]];
    const double time_raw = detail::parse_double(f[col["time"]], "time", line_no);
    const int time = static_cast<int>(time_raw);
    if (time_raw != time || time < 1)
      throw PanelError("line " + std::to_string(line_no) + ": time must be a positive integer");
    const double n_raw = detail::parse_double(f[col["n"]], "n", line_no);
    const auto n = static_cast<std::int64_t>(n_raw);
    if (n_raw != static_cast<double>(n) || n <= 0)
      throw PanelError("line " + std::to_string(line_no) + ": cell size n must be a positive integer");
    const double yv = detail::parse_double(f[col["y"]], "y", line_no);
    const double dv = detail::parse_double(f[col["d"]], "d", line_no);
    if (dv != 0.0 && dv != 1.0)
      throw PanelError("line " + std::to_string(line_no) + ": non-binary treatment d=" + f[col["d"]]);
    double dtv = 0.0, stv = 0.0;
    if (has_d_true) {
      dtv = detail::parse_double(f[col["d_true"]], "d_true", line_no);
      if (dtv < 0.0 || dtv > 1.0)
        throw PanelError("line " + std::to_string(line_no) + ": d_true outside [0,1]");
    }
    if (has_s_true) {
      stv = detail::parse_double(f[col["s_true"]], "s_true", line_no);
      if (stv < 0.0 || stv > 1.0)
        throw PanelError("line " + std::to_string(line_no) + ": s_true outside [0,1]");
    }

    if (!data.count(gid)) group_order.push_back(gid);
    auto& cell = data[gid][time];
    if (cell.n > 0) {
      if (!opts.aggregate_duplicates)
        throw PanelError("duplicate (group,time) row: group '" + gid + "', time " +
                         std::to_string(time));
      if (cell.d != static_cast<int>(dv))
        throw PanelError("conflicting treatment status within cell: group '" + gid +
                         "', time " + std::to_string(time));
    }
    cell.n += n;
    cell.ny += static_cast<double>(n) * yv;
    cell.nd_true += static_cast<double>(n) * dtv;
    cell.ns_true += static_cast<double>(n) * stv;
    cell.d = static_cast<int>(dv);
    max_time = std::max(max_time, time);
  }
  if (data.empty()) throw PanelError("panel file has no data rows");

  Panel panel;
  panel.periods = max_time;
  for (const auto& gid : group_order) {
    const auto& cells = data[gid];
    GroupSeries g;
    g.id = gid;
    for (int t = 1; t <= max_time; ++t) {
      const auto it = cells.find(t);
      if (it == cells.end())
        throw PanelError("unbalanced panel: group '" + gid + "' is missing time " +
                         std::to_string(t));
      const Cell& c = it->second;
      g.n.push_back(c.n);
      g.y.push_back(c.ny / static_cast<double>(c.n));
      g.d.push_back(static_cast<std::uint8_t>(c.d));
      if (has_d_true) g.d_true.push_back(c.nd_true / static_cast<double>(c.n));
      if (has_s_true) g.s_true.push_back(c.ns_true / static_cast<double>(c.n));
    }
    panel.groups.push_back(std::move(g));
  }
  if (opts.drop_initial_switchers) panel = stagdid::drop_initial_switchers(panel);
  return panel;
}

}  // namespace stagdid
