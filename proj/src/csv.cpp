#include "cure/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "cure/errors.hpp"

namespace cure {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    cells.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail(const std::string& origin, std::size_t line, std::size_t col,
                       const std::string& what) {
  std::ostringstream msg;
  msg << origin << ": line " << line << ", column " << col << ": " << what;
  throw ValidationError(msg.str());
}

}  // namespace

Dataset read_csv(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(origin + ": empty file");
  auto header = split(trim(line));
  const bool has_labels = trim(header.back()) == "label";
  const std::size_t ncols = header.size();
  const std::size_t d = has_labels ? ncols - 1 : ncols;
  if (d == 0) throw ValidationError(origin + ": no feature columns");

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = trim(line);
    if (body.empty()) continue;
    auto cells = split(body);
    if (cells.size() != ncols) {
      fail(origin, lineno, cells.size(),
           "expected " + std::to_string(ncols) + " cells, found " + std::to_string(cells.size()));
    }
    for (std::size_t j = 0; j < ncols; ++j) {
      auto cell = trim(cells[j]);
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        fail(origin, lineno, j + 1, "not a number: '" + std::string(cell) + "'");
      }
      if (!std::isfinite(v)) fail(origin, lineno, j + 1, "non-finite value");
      if (has_labels && j == d) {
        if (v != 1.0 && v != -1.0) fail(origin, lineno, j + 1, "label must be -1 or 1");
        labels.push_back(static_cast<int>(v));
      } else {
        values.push_back(v);
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(values.size() / d);
  if (n == 0) throw ValidationError(origin + ": no data rows");

  Dataset ds;
  ds.x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), n, static_cast<Eigen::Index>(d));
  if (has_labels) ds.labels = Eigen::Map<const Eigen::VectorXi>(labels.data(), n);
  ds.meta.source = "external";
  return ds;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_csv(in, path.string());
}

void write_csv(const Dataset& ds, std::ostream& out) {
  const Eigen::Index d = ds.d();
  for (Eigen::Index j = 0; j < d; ++j) out << (j ? "," : "") << 'f' << j;
  if (ds.labels) out << ",label";
  out << '\n';
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out << (j ? "," : "") << format_double(ds.x(i, j));
    if (ds.labels) out << ',' << (*ds.labels)(i);
    out << '\n';
  }
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_csv(ds, out);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace cure
