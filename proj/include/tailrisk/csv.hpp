#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tailrisk/matrix.hpp"

namespace tailrisk {

/// CSV ingestion failure with a machine-distinguishable kind and the
/// offending 1-based line where applicable.
class CsvError : public std::runtime_error {
public:
    enum class Kind { io, empty_file, ragged_row, bad_cell };

    CsvError(Kind kind, std::string message, std::size_t line = 0)
        : std::runtime_error(std::move(message)), kind_(kind), line_(line) {}

    Kind kind() const noexcept { return kind_; }
    std::size_t line() const noexcept { return line_; }

private:
    Kind kind_;
    std::size_t line_;
};

namespace detail {
inline bool parse_double(std::string_view cell, double& out) {
    // trim ascii whitespace
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
        cell.remove_suffix(1);
    if (cell.empty()) return false;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return ec == std::errc{} && ptr == cell.data() + cell.size() && std::isfinite(out);
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}
}  // namespace detail

/// Loads a rectangular numeric CSV into a sample matrix. A single header row
/// is auto-detected (any first row with a non-numeric cell) and skipped.
/// Ragged rows and non-numeric data cells are distinct errors naming the line.
inline Matrix load_returns_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvError(CsvError::Kind::io, "cannot open CSV file: " + path);

    std::vector<double> values;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::string line;
    std::size_t line_no = 0;
    bool first_content_row = true;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view sv(line);
        if (!sv.empty() && sv.back() == '\r') sv.remove_suffix(1);
        if (sv.empty()) continue;  // blank lines (e.g. trailing newline) are skipped
        const auto cells = detail::split_commas(sv);
        std::vector<double> parsed(cells.size());
        bool all_numeric = true;
        std::size_t bad_index = 0;
        for (std::size_t j = 0; j < cells.size(); ++j) {
            if (!detail::parse_double(cells[j], parsed[j])) {
                all_numeric = false;
                bad_index = j;
                break;
            }
        }
        if (first_content_row) {
            first_content_row = false;
            if (!all_numeric) continue;  // header row
            cols = cells.size();
        } else if (!all_numeric) {
            std::ostringstream msg;
            msg << "non-numeric cell at line " << line_no << ", column " << (bad_index + 1);
            throw CsvError(CsvError::Kind::bad_cell, msg.str(), line_no);
        }
        if (cols == 0) cols = cells.size();  // header consumed; first data row fixes the width
        if (cells.size() != cols) {
            std::ostringstream msg;
            msg << "ragged row at line " << line_no << ": expected " << cols << " columns, got "
                << cells.size();
            throw CsvError(CsvError::Kind::ragged_row, msg.str(), line_no);
        }
        values.insert(values.end(), parsed.begin(), parsed.end());
        ++rows;
    }
    if (rows == 0) throw CsvError(CsvError::Kind::empty_file, "CSV file has no data rows: " + path);
    return Matrix(rows, cols, std::move(values));
}

/// Shortest exact decimal representation; round-trips through from_chars.
inline std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace tailrisk
