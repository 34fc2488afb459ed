#include "transferlab/io.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "transferlab/errors.hpp"

namespace transferlab {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

double parse_double(const std::string& token, const std::string& what) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || (end && *end != '\0'))
    throw Error("io", "cannot parse " + what + " from '" + token + "'");
  return v;
}

}  // namespace

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_matrix_market(std::ostream& os, const SparseCsr& m,
                         const std::string& comment) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  if (!comment.empty()) os << "% " << comment << "\n";
  os << m.n() << " " << m.n() << " " << m.nnz() << "\n";
  const auto& rp = m.row_ptr();
  const auto& cols = m.cols();
  const auto& vals = m.values();
  for (std::int64_t i = 0; i < m.n(); ++i)
    for (std::int64_t k = rp[static_cast<std::size_t>(i)];
         k < rp[static_cast<std::size_t>(i) + 1]; ++k)
      os << (i + 1) << " " << (cols[static_cast<std::size_t>(k)] + 1) << " "
         << fmt17(vals[static_cast<std::size_t>(k)]) << "\n";
  if (!os) throw Error("io", "failed writing Matrix Market stream");
}

void write_matrix_market_file(const std::string& path, const SparseCsr& m,
                              const std::string& comment) {
  std::ofstream os(path);
  if (!os) throw Error("io", "cannot open '" + path + "' for writing");
  write_matrix_market(os, m, comment);
}

SparseCsr read_matrix_market(std::istream& is) {
  std::string line;
  if (!std::getline(is, line))
    throw Error("io", "empty Matrix Market stream");
  {
    std::istringstream hdr(line);
    std::string banner, object, format, field, symmetry;
    hdr >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket" || lower(object) != "matrix" ||
        lower(format) != "coordinate" || lower(field) != "real" ||
        lower(symmetry) != "general")
      throw Error("io",
                  "unsupported Matrix Market header (need 'matrix coordinate "
                  "real general'): " + line);
  }
  std::int64_t rows = 0, cols = 0, nnz = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '%') continue;
    std::istringstream sz(line);
    if (!(sz >> rows >> cols >> nnz))
      throw Error("io", "cannot parse Matrix Market size line: " + line);
    break;
  }
  if (rows <= 0 || rows != cols)
    throw Error("io", "Matrix Market matrix must be square and nonempty");
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(nnz));
  std::int64_t seen = 0;
  while (seen < nnz && std::getline(is, line)) {
    if (line.empty() || line[0] == '%') continue;
    std::istringstream row(line);
    std::int64_t i = 0, j = 0;
    std::string value;
    if (!(row >> i >> j >> value))
      throw Error("io", "cannot parse Matrix Market entry: " + line);
    if (i < 1 || i > rows || j < 1 || j > cols)
      throw Error("io", "Matrix Market entry index out of range: " + line);
    entries.push_back({i - 1, j - 1, parse_double(value, "matrix entry")});
    ++seen;
  }
  if (seen != nnz)
    throw Error("io", "Matrix Market stream ended after " +
                          std::to_string(seen) + " of " + std::to_string(nnz) +
                          " entries");
  return SparseCsr::from_triplets(rows, std::move(entries));
}

SparseCsr read_matrix_market_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("io", "cannot open '" + path + "' for reading");
  return read_matrix_market(is);
}

void write_vector_csv(std::ostream& os, const std::vector<double>& v) {
  for (double x : v) os << fmt17(x) << "\n";
  if (!os) throw Error("io", "failed writing vector CSV");
}

std::vector<double> read_vector_csv(std::istream& is) {
  std::vector<double> v;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    v.push_back(parse_double(line, "vector value"));
  }
  return v;
}

std::vector<double> read_indexed_csv(std::istream& is, std::int64_t n) {
  std::vector<double> values(static_cast<std::size_t>(n), 0.0);
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::string line;
  std::int64_t count = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw Error("io", "observable CSV line lacks a comma: " + line);
    const std::string idx_token = line.substr(0, comma);
    // allow a header line like "index,value"
    if (count == 0 && !idx_token.empty() &&
        !std::isdigit(static_cast<unsigned char>(idx_token[0])) &&
        idx_token[0] != '-' && idx_token[0] != '+')
      continue;
    const auto idx =
        static_cast<std::int64_t>(parse_double(idx_token, "cell index"));
    if (idx < 1 || idx > n)
      throw Error("io", "cell index " + std::to_string(idx) +
                            " outside 1.." + std::to_string(n));
    if (seen[static_cast<std::size_t>(idx - 1)])
      throw Error("io", "duplicate cell index " + std::to_string(idx));
    seen[static_cast<std::size_t>(idx - 1)] = true;
    values[static_cast<std::size_t>(idx - 1)] =
        parse_double(line.substr(comma + 1), "cell value");
    ++count;
  }
  if (count != n)
    throw Error("io", "observable CSV covers " + std::to_string(count) +
                          " of " + std::to_string(n) + " cells");
  return values;
}

}  // namespace transferlab
