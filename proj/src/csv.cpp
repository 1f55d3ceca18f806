#include "slm/csv.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>

namespace slm::csv {

namespace {

bool needs_quoting(const std::string& s) {
    return s.find_first_of(",\"\n\r") != std::string::npos;
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void append_cell(std::string& out, const Cell& cell) {
    if (const double* d = std::get_if<double>(&cell)) {
        out += format_double(*d);
    } else {
        const std::string& s = std::get<std::string>(cell);
        out += needs_quoting(s) ? quote(s) : s;
    }
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

std::string render(const std::vector<Row>& rows, const std::vector<std::string>& header) {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        out += needs_quoting(header[i]) ? quote(header[i]) : header[i];
    }
    out += '\n';
    for (const Row& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            append_cell(out, row[i]);
        }
        out += '\n';
    }
    return out;
}

void emit_csv(const std::vector<Row>& rows, const std::vector<std::string>& header,
              const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::invalid_argument("emit_csv: unwritable output path: " + path);
    const std::string body = render(rows, header);
    f.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!f) throw std::invalid_argument("emit_csv: write failed: " + path);
}

}  // namespace slm::csv
