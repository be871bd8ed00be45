#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace qheat::io {

using Cell = std::variant<double, long long, bool, std::string>;

/// Column-named result table; rows keep insertion order.
struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    // plot hints for the optional gnuplot script
    std::string plot_x;
    std::vector<std::string> plot_y;
    std::string plot_group;
    bool plot_logx = false;

    void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

inline std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", x);
    return buf;
}

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string cell_text(const Cell& c) {
    struct V {
        std::string operator()(double x) const { return format_number(x); }
        std::string operator()(long long x) const { return std::to_string(x); }
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(const std::string& s) const { return s; }
    };
    return std::visit(V{}, c);
}

inline nlohmann::json cell_json(const Cell& c) {
    struct V {
        nlohmann::json operator()(double x) const {
            return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(format_number(x));
        }
        nlohmann::json operator()(long long x) const { return x; }
        nlohmann::json operator()(bool b) const { return b; }
        nlohmann::json operator()(const std::string& s) const { return s; }
    };
    return std::visit(V{}, c);
}

inline void write_provenance(std::ostream& os, const std::vector<std::string>& lines) {
    for (const auto& l : lines) os << "# " << l << '\n';
}

inline void write_csv(std::ostream& os, const Table& t) {
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << csv_quote(t.columns[i]);
    os << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << csv_quote(cell_text(r[i]));
        os << '\n';
    }
}

/// One object per row with the CSV column names as keys, in column order.
inline void write_jsonl(std::ostream& os, const Table& t) {
    for (const auto& r : t.rows) {
        nlohmann::ordered_json j;
        for (std::size_t i = 0; i < r.size() && i < t.columns.size(); ++i) j[t.columns[i]] = cell_json(r[i]);
        os << j.dump() << '\n';
    }
}

/// gnuplot script for a CSV written from `t`; one curve per (y column, group value).
inline void write_gnuplot(std::ostream& os, const Table& t, const std::string& data_file) {
    auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < t.columns.size(); ++i)
            if (t.columns[i] == name) return static_cast<long long>(i + 1);
        return -1LL;
    };
    std::vector<std::string> groups;
    const long long g = t.plot_group.empty() ? -1 : col(t.plot_group);
    if (g > 0)
        for (const auto& r : t.rows) {
            const std::string v = cell_text(r[static_cast<std::size_t>(g - 1)]);
            if (std::find(groups.begin(), groups.end(), v) == groups.end()) groups.push_back(v);
        }
    os << "set datafile separator ','\nset datafile commentschars '#'\n";
    os << "set xlabel '" << t.plot_x << "'\n";
    if (t.plot_logx) os << "set logscale x\n";
    os << "plot ";
    bool first = true;
    for (const auto& y : t.plot_y) {
        const long long yc = col(y), xc = col(t.plot_x);
        if (yc < 0 || xc < 0) continue;
        if (groups.empty()) {
            os << (first ? "" : ", \\\n     ") << "'" << data_file << "' using " << xc << ":" << yc
               << " with linespoints title '" << y << "'";
            first = false;
        }
        for (const auto& v : groups) {
            os << (first ? "" : ", \\\n     ") << "'" << data_file << "' using " << xc << ":(strcol(" << g
               << ") eq '" << v << "' ? column(" << yc << ") : NaN) with linespoints title '" << y << " "
               << v << "'";
            first = false;
        }
    }
    os << '\n';
}

} // namespace qheat::io
