#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lda/errors.hpp"

namespace lda {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Minimal CSV: comma separator, no quoting (none of our schemas need it),
// first line is the header. Malformed rows raise line-numbered DataError.
inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path);
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        std::istringstream ss(s);
        while (std::getline(ss, cur, ',')) out.push_back(cur);
        if (!s.empty() && s.back() == ',') out.emplace_back();
        return out;
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(t.header.size()) + " fields, got " +
                            std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
    }
    return t;
}

inline double csv_number(const CsvTable& t, std::size_t row, std::size_t col,
                         const std::string& path) {
    const std::string& s = t.rows[row][col];
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError(path + ":" + std::to_string(row + 2) + ": not a number: '" + s + "'");
    }
}

// Deterministic formatting: shortest round-trip representation.
inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path) {
        if (!out_) throw DataError("cannot open for writing: " + path);
    }
    void header(const std::vector<std::string>& cols) { line(cols); }
    void row(const std::vector<std::string>& cells) { line(cells); }

private:
    void line(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }
    std::ofstream out_;
};

} // namespace lda
