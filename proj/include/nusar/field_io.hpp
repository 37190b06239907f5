#pragma once

#include <iosfwd>
#include <string>

#include "nusar/model.hpp"

namespace nusar {

/// CSV with header `i,j,value[,innovation]`, one row per hull point in layer
/// order. The innovation cell is blank on the d = 0 layer.
void write_field_csv(std::ostream& out, const Field& f);
void write_field_csv(const std::string& path, const Field& f);

/// Reads what write_field_csv writes, rows in any order. The window is
/// (max i, max j). Throws MissingValues for absent or duplicate points and Io
/// for unreadable input.
Field read_field_csv(std::istream& in);
Field read_field_csv(const std::string& path);

}  // namespace nusar
