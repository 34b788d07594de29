#include "fleetmind/canonical.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fleetmind/errors.hpp"

namespace fleetmind::canon {

std::string format_double(double v) {
    if (v == 0.0) return "0";  // collapses -0 as well
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

double quantize(double v) {
    if (v == 0.0) return 0.0;
    return std::strtod(format_double(v).c_str(), nullptr);
}

namespace {

void dump_value(const json& j, std::string& out) {
    switch (j.type()) {
        case json::value_t::object: {
            out += '{';
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ',';
                first = false;
                out += json(it.key()).dump();
                out += ':';
                dump_value(it.value(), out);
            }
            out += '}';
            break;
        }
        case json::value_t::array: {
            out += '[';
            bool first = true;
            for (const auto& item : j) {
                if (!first) out += ',';
                first = false;
                dump_value(item, out);
            }
            out += ']';
            break;
        }
        case json::value_t::string:
            out += j.dump();
            break;
        case json::value_t::number_float:
            out += format_double(j.get<double>());
            break;
        case json::value_t::number_integer:
        case json::value_t::number_unsigned:
        case json::value_t::boolean:
            out += j.dump();
            break;
        case json::value_t::null:
        default:
            out += "null";
            break;
    }
}

}  // namespace

std::string dump(const json& j) {
    std::string out;
    dump_value(j, out);
    return out;
}

json parse(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) {
        throw Error(Err::CorruptSnapshot, "unparseable canonical text");
    }
    return j;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Err::CorruptSnapshot, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Err::CorruptSnapshot, "cannot write " + path);
    out << text;
}

}  // namespace fleetmind::canon
