#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "transferlab/sparse.hpp"

namespace transferlab {

/// Formats a double with 17 significant digits (%.17g), enough to round-trip
/// IEEE doubles bit-exactly through text.
std::string fmt17(double x);

/// Writes "coordinate real general" Matrix Market with 1-based indices in
/// row-major order. Values printed via fmt17, so a re-import reproduces the
/// matrix bit-exactly.
void write_matrix_market(std::ostream& os, const SparseCsr& m,
                         const std::string& comment = "");
void write_matrix_market_file(const std::string& path, const SparseCsr& m,
                              const std::string& comment = "");

/// Reads coordinate real general Matrix Market (square). Duplicate entries
/// are accumulated, matching assembly semantics.
SparseCsr read_matrix_market(std::istream& is);
SparseCsr read_matrix_market_file(const std::string& path);

/// Single-column CSV of doubles, one value per line (fmt17).
void write_vector_csv(std::ostream& os, const std::vector<double>& v);
std::vector<double> read_vector_csv(std::istream& is);

/// Two-column "index,value" CSV with 1-based cell indices; every cell
/// 1..n must appear exactly once. Used for table observables.
std::vector<double> read_indexed_csv(std::istream& is, std::int64_t n);

}  // namespace transferlab
