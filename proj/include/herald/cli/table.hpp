#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <system_error>
#include <type_traits>
#include <variant>
#include <vector>

#include "json.hpp"

namespace herald::cli {

/// Shortest decimal that parses back to the same double.
[[nodiscard]] inline std::string format_number(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return {buf, res.ptr};
}

using Cell = std::variant<double, std::int64_t, bool, std::string>;

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;
};

[[nodiscard]] inline std::string format_cell(const Cell& cell) {
    if (const auto* d = std::get_if<double>(&cell)) {
        return format_number(*d);
    }
    if (const auto* i = std::get_if<std::int64_t>(&cell)) {
        return std::to_string(*i);
    }
    if (const auto* s = std::get_if<std::string>(&cell)) {
        return *s;
    }
    return std::get<bool>(cell) ? "true" : "false";
}

inline void write_csv(std::ostream& out, const Table& table) {
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        out << (c ? "," : "") << table.header[c];
    }
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out << (c ? "," : "") << format_cell(row[c]);
        }
        out << '\n';
    }
}

/// Array of row objects keyed by the header. Non-finite numbers become null.
[[nodiscard]] inline nlohmann::ordered_json to_json(const Table& table) {
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : table.rows) {
        nlohmann::ordered_json obj = nlohmann::ordered_json::object();
        for (std::size_t c = 0; c < row.size(); ++c) {
            std::visit(
                [&](const auto& v) {
                    if constexpr (std::is_same_v<std::decay_t<decltype(v)>, double>) {
                        if (std::isfinite(v)) {
                            obj[table.header[c]] = v;
                        } else {
                            obj[table.header[c]] = nullptr;
                        }
                    } else {
                        obj[table.header[c]] = v;
                    }
                },
                row[c]);
        }
        rows.push_back(std::move(obj));
    }
    return rows;
}

inline void write_json(std::ostream& out, const Table& table) { out << to_json(table).dump(2) << '\n'; }

}  // namespace herald::cli
