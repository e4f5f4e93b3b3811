#pragma once

#include <string>

namespace tlasso {

// 17 significant digits: round-trips every double.
std::string format_double(double v);

// RFC 4180 field quoting (only when the field needs it).
std::string csv_field(const std::string& s);

}  // namespace tlasso
