// Line-oriented reader for the whitespace-separated text formats.
#ifndef JLGCN_SRC_TSV_HPP
#define JLGCN_SRC_TSV_HPP

#include "jlgcn/errors.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace jlgcn::detail {

namespace fs = std::filesystem;

/// Whitespace-separated records with 1-based line numbers.
class TsvReader {
public:
    explicit TsvReader(const fs::path& path) : path_(path.string()), in_(path) {
        if (!in_) {
            throw DataError("cannot open " + path_);
        }
    }

    bool next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            fields_.clear();
            std::size_t i = 0;
            while (i < line.size()) {
                while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
                    ++i;
                }
                const std::size_t start = i;
                while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) {
                    ++i;
                }
                if (i > start) {
                    fields_.emplace_back(line.substr(start, i - start));
                }
            }
            if (fields_.empty() || fields_.front().front() == '#') {
                continue;
            }
            return true;
        }
        return false;
    }

    const std::vector<std::string>& fields() const noexcept { return fields_; }
    std::size_t line() const noexcept { return line_no_; }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(path_, line_no_, what);
    }

    void expect_fields(std::size_t n) const {
        if (fields_.size() != n) {
            fail("expected " + std::to_string(n) + " fields, found " +
                 std::to_string(fields_.size()));
        }
    }

    double real(std::size_t k) const {
        const std::string& s = fields_[k];
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
            fail("not a finite number: '" + s + "'");
        }
        return v;
    }

    long long integer(std::size_t k) const {
        const std::string& s = fields_[k];
        long long v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            fail("not an integer: '" + s + "'");
        }
        return v;
    }

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t line_no_ = 0;
    std::vector<std::string> fields_;
};

inline std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    return out;
}

} // namespace jlgcn::detail

#endif // JLGCN_SRC_TSV_HPP
