#include "cpmiss/csv.hpp"

#include "cpmiss/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

namespace cpmiss {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_record(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    if (in_quotes) throw DataError("line " + std::to_string(line_no) + ": unterminated quoted field");
    fields.push_back(std::move(field));
    return fields;
}

} // namespace

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (trim(header[j]) == name) return j;
    }
    return std::nullopt;
}

CsvTable read_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_record(line, line_no);
        if (!have_header) {
            for (auto& f : fields) f = std::string(trim(f));
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(line_no);
    }
    if (!have_header) throw DataError("CSV input is empty");
    return table;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return read_csv(in);
}

std::optional<double> parse_numeric_cell(std::string_view cell, std::string_view na_token) {
    const auto t = trim(cell);
    if (t.empty() || t == trim(na_token)) return std::nullopt;
    if (t == "inf" || t == "+inf" || t == "Inf" || t == "+Inf") return HUGE_VAL;
    if (t == "-inf" || t == "-Inf") return -HUGE_VAL;
    std::string_view s = t;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || std::isnan(v)) {
        throw DataError("not a number: '" + std::string(t) + "'");
    }
    return v;
}

std::string format_full(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string format_fixed(double v, int decimals) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    std::string s(buf);
    if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);  // no "-0.000000"
    return s;
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

NumericTable read_numeric_csv(const std::filesystem::path& path, std::string_view na_token) {
    const CsvTable raw = read_csv_file(path);
    NumericTable out;
    out.header = raw.header;
    std::string bad;
    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
        const auto& fields = raw.rows[r];
        if (fields.size() != raw.header.size()) {
            bad += (bad.empty() ? "" : ", ") + std::to_string(raw.line_numbers[r]);
            continue;
        }
        std::vector<std::optional<double>> row(fields.size());
        try {
            for (std::size_t j = 0; j < fields.size(); ++j) row[j] = parse_numeric_cell(fields[j], na_token);
        } catch (const DataError&) {
            bad += (bad.empty() ? "" : ", ") + std::to_string(raw.line_numbers[r]);
            continue;
        }
        out.rows.push_back(std::move(row));
    }
    if (!bad.empty()) throw DataError(path.string() + ": malformed rows at lines " + bad);
    return out;
}

void write_numeric_csv(std::ostream& out, const NumericTable& table, std::string_view na_token) {
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        out << (j ? "," : "") << csv_escape(table.header[j]);
    }
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            out << (j ? "," : "");
            if (row[j]) {
                out << format_full(*row[j]);
            } else {
                out << na_token;
            }
        }
        out << '\n';
    }
}

} // namespace cpmiss
