#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cpmiss {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    /// 1-based source line of each row (header is line 1).
    std::vector<std::size_t> line_numbers;

    /// Column position of `name`, if present.
    std::optional<std::size_t> column(std::string_view name) const;
};

/// Reads a comma-separated table with a header row. Double-quoted fields may
/// contain commas and doubled quotes. Blank lines are skipped.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::filesystem::path& path);

/// Parses one numeric cell. Empty cells and cells equal to `na_token` (after
/// trimming) are missing. "inf"/"-inf" are accepted. Throws DataError otherwise.
std::optional<double> parse_numeric_cell(std::string_view cell, std::string_view na_token = "NA");

/// Shortest representation that round-trips; "inf", "-inf" and "nan" for non-finite values.
std::string format_full(double v);
/// Fixed notation with `decimals` digits; "inf", "-inf" and "nan" for non-finite values.
std::string format_fixed(double v, int decimals = 6);

/// Quotes a field when it contains a comma, quote or newline.
std::string csv_escape(std::string_view field);

struct NumericTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::optional<double>>> rows;
};

NumericTable read_numeric_csv(const std::filesystem::path& path, std::string_view na_token = "NA");
/// Missing cells are written as `na_token`; values at full precision.
void write_numeric_csv(std::ostream& out, const NumericTable& table, std::string_view na_token = "NA");

} // namespace cpmiss
