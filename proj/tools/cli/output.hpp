#ifndef NCOT_CLI_OUTPUT_HPP
#define NCOT_CLI_OUTPUT_HPP

// Serialization for the command line tool. Numbers are printed with 17
// significant digits so that every value round-trips; non-finite values
// become null in JSON and inf / -inf / nan in CSV.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncot/ncot.hpp"

namespace ncot::cli {

using nlohmann::json;

inline std::string format_number(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace detail {

inline void write_string(std::ostream& out, const std::string& s)
{
    out << json(s).dump();
}

inline void write_json(std::ostream& out, const json& v, int indent, int level)
{
    const std::string pad = indent > 0 ? "\n" + std::string(indent * (level + 1), ' ') : "";
    const std::string close = indent > 0 ? "\n" + std::string(indent * level, ' ') : "";
    const char* sep = indent > 0 ? ": " : ":";
    switch (v.type()) {
    case json::value_t::object: {
        if (v.empty()) {
            out << "{}";
            return;
        }
        out << '{';
        bool first = true;
        for (auto it = v.begin(); it != v.end(); ++it) {
            out << (first ? "" : ",") << pad;
            first = false;
            write_string(out, it.key());
            out << sep;
            write_json(out, it.value(), indent, level + 1);
        }
        out << close << '}';
        return;
    }
    case json::value_t::array: {
        if (v.empty()) {
            out << "[]";
            return;
        }
        // numeric arrays stay on one line
        const bool flat = std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_primitive(); });
        out << '[';
        bool first = true;
        for (const auto& x : v) {
            out << (first ? "" : ",") << (flat ? (first || indent == 0 ? "" : " ") : pad);
            first = false;
            write_json(out, x, indent, level + 1);
        }
        out << (flat ? "" : close) << ']';
        return;
    }
    case json::value_t::number_float: {
        const double x = v.get<double>();
        if (std::isfinite(x))
            out << format_number(x);
        else
            out << "null";
        return;
    }
    default:
        out << v.dump();
    }
}

} // namespace detail

/// Pretty JSON (indent > 0) or one line (indent == 0).
inline void write_json(std::ostream& out, const json& v, int indent = 2)
{
    detail::write_json(out, v, indent, 0);
    out << '\n';
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& cells)
{
    for (std::size_t i = 0; i < cells.size(); ++i)
        out << (i ? "," : "") << cells[i];
    out << '\n';
}

inline json to_json(const CheckReport& r)
{
    json rows = json::array();
    for (const auto& row : r.rows) {
        json values = json::object();
        for (const auto& [k, v] : row.values)
            values[k] = v;
        json entry = {{"values", values}};
        if (!row.label.empty())
            entry["label"] = row.label;
        rows.push_back(entry);
    }
    json witness = json::object();
    for (const auto& [k, v] : r.witness)
        witness[k] = v;
    json out = {{"name", r.name},         {"passed", r.passed},   {"worst_margin", r.worst_margin},
                {"tolerance", r.tolerance}, {"witness", witness}, {"samples", r.samples},
                {"seed", r.seed},         {"rows", rows}};
    if (!r.note.empty())
        out["note"] = r.note;
    return out;
}

/// Rows of a report as CSV; the columns are the union of all value keys.
inline void write_csv(std::ostream& out, const CheckReport& r)
{
    std::vector<std::string> keys;
    for (const auto& row : r.rows)
        for (const auto& [k, v] : row.values)
            if (std::find(keys.begin(), keys.end(), k) == keys.end())
                keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    std::vector<std::string> header{"check", "label"};
    header.insert(header.end(), keys.begin(), keys.end());
    write_csv_row(out, header);
    for (const auto& row : r.rows) {
        std::vector<std::string> cells{r.name, row.label};
        for (const auto& k : keys) {
            const auto it = row.values.find(k);
            cells.push_back(it == row.values.end() ? "" : format_number(it->second));
        }
        write_csv_row(out, cells);
    }
}

inline json element_json(const Element& x)
{
    json blocks = json::array();
    for (const auto& m : x.blocks()) {
        json flat = json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                flat.push_back(m(i, j).real());
                flat.push_back(m(i, j).imag());
            }
        blocks.push_back(flat);
    }
    return blocks;
}

inline json certificates_json(const TransportCertificates& c)
{
    return {{"feasibility_residual", c.feasibility_residual},
            {"recomputed_action", c.recomputed_action},
            {"refinement_delta", c.refinement_delta},
            {"refinement_grid", c.refinement_grid},
            {"grid", c.grid},
            {"eps_schedule", c.eps_schedule},
            {"final_eps", c.final_eps},
            {"endpoints_regularized", c.endpoints_regularized},
            {"iterations", c.iterations},
            {"stage_starts", c.stage_starts},
            {"objective_history", c.objective_history}};
}

} // namespace ncot::cli

#endif // NCOT_CLI_OUTPUT_HPP
