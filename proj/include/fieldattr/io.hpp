#pragma once

// Delimited-text input/output. Both input formats are plain tables:
//   price panel: header "date,<ticker>,<ticker>,..." then one row per day
//   field series: "date,close" (header optional) then one row per day
// Delimiter is sniffed per file: tab, comma, or semicolon if present in the
// first line, otherwise runs of whitespace.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fieldattr/series.hpp"

namespace fieldattr {

inline char sniff_delimiter(const std::string& line) {
    if (line.find('\t') != std::string::npos) return '\t';
    if (line.find(',') != std::string::npos) return ',';
    if (line.find(';') != std::string::npos) return ';';
    return ' ';
}

inline std::vector<std::string> split_fields(const std::string& line, char delim) {
    std::vector<std::string> out;
    if (delim == ' ') {
        std::istringstream is(line);
        std::string tok;
        while (is >> tok) out.push_back(tok);
        return out;
    }
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline bool parse_double(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    auto [p, ec] = std::from_chars(b, e, out);
    if (ec != std::errc()) return false;
    while (p < e && (*p == ' ' || *p == '\t')) ++p;
    return p == e;
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty()) continue;
        lines.push_back(line);
    }
    return lines;
}

struct RawTable {
    std::vector<std::string> header;           // empty if no header detected
    std::vector<std::string> dates;            // first column
    std::vector<std::vector<double>> rows;     // remaining columns, parsed
};

// Reads a date-keyed table. The first line is treated as a header when its
// second field does not parse as a number.
inline RawTable read_dated_table(const std::string& path) {
    auto lines = read_lines(path);
    if (lines.empty()) throw std::runtime_error("empty file: " + path);
    char delim = sniff_delimiter(lines[0]);
    RawTable t;
    std::size_t start = 0;
    {
        auto f = split_fields(lines[0], delim);
        double tmp;
        if (f.size() >= 2 && !parse_double(f[1], tmp)) {
            t.header = f;
            start = 1;
        }
    }
    std::size_t width = 0;
    for (std::size_t li = start; li < lines.size(); ++li) {
        auto f = split_fields(lines[li], delim);
        if (f.size() < 2)
            throw std::runtime_error(path + ": row " + std::to_string(li + 1) + " has fewer than 2 fields");
        if (width == 0) width = f.size();
        if (f.size() != width)
            throw std::runtime_error(path + ": row " + std::to_string(li + 1) + " has " +
                                     std::to_string(f.size()) + " fields, expected " + std::to_string(width));
        t.dates.push_back(f[0]);
        std::vector<double> row;
        row.reserve(f.size() - 1);
        for (std::size_t j = 1; j < f.size(); ++j) {
            double v;
            if (f[j].empty() || !parse_double(f[j], v))
                throw std::runtime_error(path + ": row " + std::to_string(li + 1) + ", column " +
                                         std::to_string(j + 1) + ": missing or non-numeric cell '" + f[j] + "'");
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    if (!t.header.empty() && t.header.size() != width)
        throw std::runtime_error(path + ": header width does not match data width");
    return t;
}

// Two-column (date, close) series such as VIX.
inline ObservableSeries load_field_series(const std::string& path, const std::string& label) {
    RawTable t = read_dated_table(path);
    ObservableSeries s;
    s.label = label;
    s.dates = t.dates;
    s.values.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        if (r.size() != 1) throw std::runtime_error(path + ": expected exactly 2 columns (date, close)");
        s.values.push_back(r[0]);
    }
    check_series(s);
    return s;
}

inline std::string fmt_g(double v, int precision = 17) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    return buf;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j) out << ',';
        out << header[j];
    }
    out << '\n';
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (j) out << ',';
            out << r[j];
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline void write_series_csv(const std::string& path, const ObservableSeries& s) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) rows.push_back({s.dates[i], fmt_g(s.values[i])});
    write_csv(path, {"date", s.label.empty() ? std::string("value") : s.label}, rows);
}

}  // namespace fieldattr
