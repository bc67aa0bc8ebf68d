#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "cure/mixture.hpp"

namespace cure {

// Dataset CSV: header f0,...,f{d-1}[,label], one sample per line. Values are
// written in shortest round-trip form; labels as -1 / 1. A last column named
// "label" is read as labels, every other column as a feature.
Dataset load_csv(const std::filesystem::path& path);
Dataset read_csv(std::istream& in, const std::string& origin = "<stream>");
void save_csv(const Dataset& ds, const std::filesystem::path& path);
void write_csv(const Dataset& ds, std::ostream& out);

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace cure
