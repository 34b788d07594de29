#pragma once

#include <string>

#include "json.hpp"

namespace fleetmind::canon {

using json = nlohmann::json;

/// Formats a double with 9 significant digits (-0 normalized to 0).
std::string format_double(double v);

/// Rounds a double to the nearest value representable by format_double.
/// Idempotent: quantize(quantize(x)) == quantize(x).
double quantize(double v);

/// Serializes to canonical text: object keys sorted, doubles via
/// format_double, no insignificant whitespace. Equal values produce
/// equal bytes.
std::string dump(const json& j);

/// Parses canonical (or plain JSON) text; throws Error{CorruptSnapshot}.
json parse(const std::string& text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

}  // namespace fleetmind::canon
