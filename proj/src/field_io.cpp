#include "nusar/field_io.hpp"

#include <algorithm>
#include <charconv>
#include <climits>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <vector>

#include "nusar/error.hpp"

namespace nusar {

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

[[noreturn]] void bad_row(std::size_t line_no, const std::string& why) {
  throw Error(ErrorCode::Io, "line " + std::to_string(line_no) + ": " + why);
}

int parse_int(const std::string& s, std::size_t line_no) {
  int v = 0;
  const auto t = trim(s);
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size()) bad_row(line_no, "bad integer '" + t + "'");
  return v;
}

double parse_double(const std::string& s, std::size_t line_no) {
  const auto t = trim(s);
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) bad_row(line_no, "bad number '" + t + "'");
    return v;
  } catch (const std::logic_error&) {
    bad_row(line_no, "bad number '" + t + "'");
  }
}

struct Row {
  LatticeIndex p;
  double value;
  std::optional<double> innovation;
};

}  // namespace

void write_field_csv(std::ostream& out, const Field& f) {
  const HullLayout& layout = f.layout();
  const bool with_eps = f.has_innovations();
  out << (with_eps ? "i,j,value,innovation\n" : "i,j,value\n");
  for (int e = 0; e <= layout.sum(); ++e)
    for (int o = 0; o < static_cast<int>(layout.layer_size(e)); ++o) {
      const LatticeIndex p = layout.point(e, o);
      out << p.i << ',' << p.j << ',' << fmt17(f.value(e, o));
      if (with_eps) {
        out << ',';
        if (e > 0) out << fmt17(f.innovation(e, o));
      }
      out << '\n';
    }
}

void write_field_csv(const std::string& path, const Field& f) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  write_field_csv(out, f);
  if (!out) throw Error(ErrorCode::Io, "failed writing '" + path + "'");
}

Field read_field_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error(ErrorCode::Io, "empty field CSV");
  ++line_no;
  const auto header = split_csv(line);
  std::vector<std::string> cols;
  for (const auto& h : header) cols.push_back(trim(h));
  const bool with_eps = cols.size() == 4 && cols[3] == "innovation";
  if (cols.size() < 3 || cols[0] != "i" || cols[1] != "j" || cols[2] != "value" || (cols.size() == 4 && !with_eps) ||
      cols.size() > 4)
    bad_row(line_no, "expected header i,j,value[,innovation]");

  std::vector<Row> rows;
  int k = INT_MIN;
  int l = INT_MIN;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != cols.size()) bad_row(line_no, "expected " + std::to_string(cols.size()) + " cells");
    Row r{{parse_int(cells[0], line_no), parse_int(cells[1], line_no)}, parse_double(cells[2], line_no), std::nullopt};
    if (with_eps && !trim(cells[3]).empty()) r.innovation = parse_double(cells[3], line_no);
    k = std::max(k, r.p.i);
    l = std::max(l, r.p.j);
    rows.push_back(r);
  }
  if (rows.empty()) throw Error(ErrorCode::MissingValues, "field CSV has no rows");

  const TriangleWindow w{k, l};
  const HullLayout layout(w);
  if (layout.empty()) throw Error(ErrorCode::MissingValues, "field CSV does not describe a nonempty window");
  std::vector<double> values(layout.size(), std::nan(""));
  std::vector<char> seen(layout.size(), 0);
  std::vector<double> eps(with_eps ? layout.triangle_size() : 0, 0.0);
  std::size_t eps_count = 0;
  for (const Row& r : rows) {
    if (!layout.contains(r.p)) {
      std::ostringstream msg;
      msg << "(" << r.p.i << "," << r.p.j << ") is outside the hull of window (" << k << "," << l << ")";
      throw Error(ErrorCode::MissingValues, msg.str());
    }
    const std::size_t idx = layout.index_of(r.p);
    if (seen[idx]) {
      std::ostringstream msg;
      msg << "duplicate row for (" << r.p.i << "," << r.p.j << ")";
      throw Error(ErrorCode::MissingValues, msg.str());
    }
    seen[idx] = 1;
    values[idx] = r.value;
    if (r.innovation && r.p.i + r.p.j >= 1) {
      eps[idx - layout.layer_size(0)] = *r.innovation;
      ++eps_count;
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    std::ostringstream msg;
    msg << "field CSV covers " << rows.size() << " of " << layout.size() << " hull points";
    throw Error(ErrorCode::MissingValues, msg.str());
  }
  if (with_eps && eps_count != layout.triangle_size())
    throw Error(ErrorCode::MissingInnovations, "innovation column is incomplete on the triangle");
  return Field(w, std::move(values), std::move(eps));
}

Field read_field_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return read_field_csv(in);
}

}  // namespace nusar
