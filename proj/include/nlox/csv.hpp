#pragma once

// CSV read/write with 17-significant-digit floats so values round-trip
// exactly through text.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nlox/errors.hpp"
#include "nlox/linalg.hpp"

namespace nlox {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const Mat& data) {
    std::ofstream out(path);
    if (!out) throw io_error("write_csv: cannot open " + path);
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    for (std::size_t r = 0; r < data.rows(); ++r) {
        for (std::size_t c = 0; c < data.cols(); ++c)
            out << (c ? "," : "") << format_double(data(r, c));
        out << '\n';
    }
    if (!out) throw io_error("write_csv: write failed for " + path);
}

struct CsvTable {
    std::vector<std::string> header;
    Mat data;
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("read_csv: cannot open " + path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw io_error("read_csv: empty file " + path);
    {
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) table.header.push_back(cell);
    }
    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::size_t cols = 0;
        while (std::getline(ss, cell, ',')) {
            values.push_back(std::stod(cell));
            ++cols;
        }
        if (cols != table.header.size())
            throw io_error("read_csv: ragged row in " + path);
        ++rows;
    }
    table.data = Mat(rows, table.header.size());
    std::copy(values.begin(), values.end(), table.data.data());
    return table;
}

} // namespace nlox
