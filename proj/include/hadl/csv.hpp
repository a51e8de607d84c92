#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace hadl::csv {

/// Shortest decimal text that parses back to the same double.
std::string format(double value);

/// RFC 4180 quoting: fields containing a comma, quote or newline are quoted.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// "# hadl config_fingerprint=<16 hex digits>" first line of every CSV output.
void write_fingerprint(std::ostream& out, std::uint64_t fingerprint);

std::string hex(std::uint64_t value);

}  // namespace hadl::csv
