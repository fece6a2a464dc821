#include "jlgcn/export.hpp"

#include "jlgcn/errors.hpp"
#include "tsv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

namespace jlgcn {

void write_matrix_csv(const DenseMatrix& m, const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    char buf[32];
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.12g", m(i, j));
            if (j > 0) {
                out << ',';
            }
            out << buf;
        }
        out << '\n';
    }
    if (!out) {
        throw DataError("failed writing " + path.string());
    }
}

DenseMatrix read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::vector<double> values;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::size_t count = 0;
        const char* p = line.data();
        const char* end = p + line.size();
        while (true) {
            double v = 0.0;
            const auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc{}) {
                throw ParseError(path.string(), lineno, "expected a number");
            }
            values.push_back(v);
            ++count;
            if (next == end) {
                break;
            }
            if (*next != ',') {
                throw ParseError(path.string(), lineno, "expected ','");
            }
            p = next + 1;
        }
        if (rows == 0) {
            cols = count;
        } else if (count != cols) {
            throw ParseError(path.string(), lineno,
                             "row has " + std::to_string(count) + " cells, expected " +
                                 std::to_string(cols));
        }
        ++rows;
    }
    return DenseMatrix(rows, cols, std::move(values));
}

std::vector<std::uint8_t> heatmap_levels(const DenseMatrix& m, double c) {
    if (!(c > 0.0) || !std::isfinite(c)) {
        throw ConfigError("heatmap log scale must be positive");
    }
    std::vector<double> t(m.size());
    double top = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) {
        const double v = m.values()[k];
        if (!std::isfinite(v)) {
            throw NumericError("heatmap input is not finite");
        }
        t[k] = std::log1p(c * std::max(v, 0.0));
        top = std::max(top, t[k]);
    }
    std::vector<std::uint8_t> levels(m.size(), 0);
    if (top > 0.0) {
        for (std::size_t k = 0; k < t.size(); ++k) {
            levels[k] = static_cast<std::uint8_t>(std::lround(255.0 * t[k] / top));
        }
    }
    return levels;
}

void write_heatmap_pgm(const DenseMatrix& m, double c, const std::filesystem::path& path) {
    const auto levels = heatmap_levels(m, c);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << "P5\n" << m.cols() << ' ' << m.rows() << "\n255\n";
    out.write(reinterpret_cast<const char*>(levels.data()),
              static_cast<std::streamsize>(levels.size()));
    if (!out) {
        throw DataError("failed writing " + path.string());
    }
}

} // namespace jlgcn
