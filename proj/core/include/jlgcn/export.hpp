#ifndef JLGCN_EXPORT_HPP
#define JLGCN_EXPORT_HPP

#include "jlgcn/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace jlgcn {

/// Comma-separated rows, 12 significant digits, no header.
void write_matrix_csv(const DenseMatrix& m, const std::filesystem::path& path);

/// Reads what write_matrix_csv produces. Throws ParseError on ragged rows
/// or non-numeric cells.
DenseMatrix read_matrix_csv(const std::filesystem::path& path);

/// Gray levels of an 8-bit heatmap: v -> log(1 + c v), then scaled so the
/// largest transformed entry maps to 255. Negative entries map to 0.
std::vector<std::uint8_t> heatmap_levels(const DenseMatrix& m, double c);

/// Binary PGM (P5) of heatmap_levels(m, c), one pixel per entry.
void write_heatmap_pgm(const DenseMatrix& m, double c, const std::filesystem::path& path);

} // namespace jlgcn

#endif // JLGCN_EXPORT_HPP
