#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "nascur/errors.hpp"

namespace nascur {

using IntList = std::vector<std::int64_t>;

// Argument values extractable from source: int, float, string, list of
// ints. Anything else makes the enclosing call unextractable. Integers
// and floats stay distinct (64 != 64.0) so model dedup is exact.
using Literal = std::variant<std::int64_t, double, std::string, IntList>;

inline bool is_int(const Literal& v) { return std::holds_alternative<std::int64_t>(v); }
inline bool is_float(const Literal& v) { return std::holds_alternative<double>(v); }
inline bool is_string(const Literal& v) { return std::holds_alternative<std::string>(v); }
inline bool is_int_list(const Literal& v) { return std::holds_alternative<IntList>(v); }

inline nlohmann::ordered_json literal_to_json(const Literal& v) {
    return std::visit([](const auto& x) { return nlohmann::ordered_json(x); }, v);
}

inline Literal literal_from_json(const nlohmann::json& j) {
    using nlohmann::json;
    switch (j.type()) {
        case json::value_t::number_integer:
        case json::value_t::number_unsigned:
            return j.get<std::int64_t>();
        case json::value_t::number_float:
            return j.get<double>();
        case json::value_t::string:
            return j.get<std::string>();
        case json::value_t::array: {
            IntList xs;
            for (const auto& e : j) {
                if (!e.is_number_integer() && !e.is_number_unsigned())
                    throw Error(errkind::bad_artifact, "non-integer list element");
                xs.push_back(e.get<std::int64_t>());
            }
            return xs;
        }
        default:
            throw Error(errkind::bad_artifact, "unsupported literal type: " + j.dump());
    }
}

// Source-style rendering: ints bare, floats shortest round-trip (the
// same formatting the JSON layer uses, so 1e-06 stays 1e-06), strings
// single-quoted, int lists as tuples.
inline std::string literal_to_source(const Literal& v) {
    if (is_string(v)) return "'" + std::get<std::string>(v) + "'";
    if (is_int_list(v)) {
        const auto& xs = std::get<IntList>(v);
        std::string out = "(";
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (i) out += ", ";
            out += std::to_string(xs[i]);
        }
        if (xs.size() == 1) out += ",";
        out += ")";
        return out;
    }
    return literal_to_json(v).dump();
}

}  // namespace nascur
