#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "churnkit/error.hpp"

namespace churnkit::csv {

/// Splits one CSV record. Handles double-quoted fields with embedded commas
/// and "" escapes; strips a trailing CR.
inline std::vector<std::string> split_record(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c == '\r' && i + 1 == line.size()) {
            // trailing CR from CRLF files
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open file: " + path);
    Table t;
    std::string line;
    if (!std::getline(in, line)) fail("empty file: " + path);
    t.header = split_record(line);
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        t.rows.push_back(split_record(line));
        if (t.rows.back().size() != t.header.size())
            fail("row " + std::to_string(t.rows.size()) + " in " + path + " has " +
                 std::to_string(t.rows.back().size()) + " fields, expected " +
                 std::to_string(t.header.size()));
    }
    return t;
}

inline std::string quote_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

inline void write_file(const std::string& path, const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write file: " + path);
    for (std::size_t c = 0; c < header.size(); ++c)
        out << (c ? "," : "") << quote_field(header[c]);
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c)
            out << (c ? "," : "") << quote_field(row[c]);
        out << '\n';
    }
    if (!out) fail("write failed: " + path);
}

/// Parses a decimal number; the row/column context ends up in the error text.
inline double parse_number(const std::string& s, std::size_t row, const std::string& column) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end != begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || begin == end)
        fail("unparseable numeric cell '" + s + "' at row " + std::to_string(row) +
             ", column " + column);
    return value;
}

/// Fixed-decimal formatting for report files (locale-independent).
inline std::string format_fixed(double v, int decimals) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.setf(std::ios::fixed);
    os.precision(decimals);
    os << v;
    return os.str();
}

}  // namespace churnkit::csv
