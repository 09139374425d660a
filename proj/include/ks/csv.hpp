#ifndef KS_CSV_HPP
#define KS_CSV_HPP

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ks/errors.hpp"

namespace ks {

// CSV convention: comma separators, header row, '.' decimal, scientific
// notation with 17 significant digits so doubles round-trip exactly.
inline std::string csv_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path) {
        require(out_.good(), errc::io_error, "cannot open " + path);
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    void flush() { out_.flush(); }

private:
    std::ofstream out_;
};

} // namespace ks

#endif
