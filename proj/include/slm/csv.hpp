#pragma once

// RFC-4180-style CSV output: '.' decimal separator, 17 significant digits,
// LF line endings, header row first.  Byte output is deterministic for
// fixed inputs.

#include <string>
#include <variant>
#include <vector>

namespace slm::csv {

using Cell = std::variant<double, std::string>;
using Row = std::vector<Cell>;

std::string format_double(double v);

std::string render(const std::vector<Row>& rows, const std::vector<std::string>& header);

void emit_csv(const std::vector<Row>& rows, const std::vector<std::string>& header,
              const std::string& path);

}  // namespace slm::csv
