#ifndef NCOT_CLI_INSTANCE_HPP
#define NCOT_CLI_INSTANCE_HPP

// Instance files, schema 1.
//
//   # comment
//   schema = 1
//   kind   = "graph"
//   nodes  = 2
//   m      = [1, 1]
//   b      = [[0, 1, 1.0]]          # (i, j, weight)
//   rho0   = [0.9, 0.1]
//
// Every value is JSON and may continue over several lines while brackets are
// open. Lindblad instances give `blocks` as (dim, weight) pairs and `jumps` as
// a list of operators. An operator is one flat (re, im, re, im, ...) row-major
// array per block; with a single block the outer list may be dropped.
// Densities are node values (graph), operators, or {"eigenpairs": [...]} with
// entries {"block": i, "value": l, "vector": [re, im, ...]}. Densities are
// rescaled to unit trace.

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncot/ncot.hpp"

namespace ncot::cli {

/// Malformed instance file; the message carries file, line and field.
class InstanceError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

struct Instance {
    std::string path;
    std::string kind;
    Derivation derivation;
    std::optional<Density> rho0, rho1;
    std::optional<Element> observable;
    std::map<std::string, std::string> labels;   // free-form text keys (name, description)
};

namespace detail {

using nlohmann::json;

struct RawEntry {
    json value;
    int line = 0;
};

inline std::string strip_comment(const std::string& s)
{
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (c == '\\')
                ++i;
            else if (c == '"')
                in_string = false;
        } else if (c == '"') {
            in_string = true;
        } else if (c == '#') {
            return s.substr(0, i);
        }
    }
    return s;
}

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// bracket depth outside strings
inline int depth_change(const std::string& s)
{
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (c == '\\')
                ++i;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"')
            in_string = true;
        else if (c == '[' || c == '{')
            ++depth;
        else if (c == ']' || c == '}')
            --depth;
    }
    return depth;
}

inline std::map<std::string, RawEntry> read_entries(std::istream& in, const std::string& path)
{
    std::map<std::string, RawEntry> out;
    std::string line;
    int lineno = 0;
    auto fail = [&](int at, const std::string& msg) -> InstanceError {
        return InstanceError(path + ":" + std::to_string(at) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        std::string text = trim(strip_comment(line));
        if (text.empty())
            continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw fail(lineno, "expected 'key = value'");
        const std::string key = trim(text.substr(0, eq));
        if (key.empty() || key.find_first_of(" \t\"[{") != std::string::npos)
            throw fail(lineno, "invalid key '" + key + "'");
        std::string value = trim(text.substr(eq + 1));
        const int start = lineno;
        int depth = depth_change(value);
        while (depth > 0 && std::getline(in, line)) {
            ++lineno;
            const std::string more = strip_comment(line);
            value += "\n" + more;
            depth += depth_change(more);
        }
        if (depth != 0)
            throw fail(start, "field '" + key + "': unbalanced brackets");
        if (out.count(key))
            throw fail(start, "field '" + key + "': duplicate key (first on line " +
                                  std::to_string(out[key].line) + ")");
        json parsed = json::parse(value, nullptr, false);
        if (parsed.is_discarded())
            throw fail(start, "field '" + key + "': value is not valid JSON");
        out[key] = {std::move(parsed), start};
    }
    return out;
}

class Reader {
public:
    Reader(std::string path, std::map<std::string, RawEntry> entries)
        : path_(std::move(path)), entries_(std::move(entries))
    {
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    InstanceError error(const std::string& key, const std::string& msg) const
    {
        const auto it = entries_.find(key);
        const std::string where = it == entries_.end() ? path_ : path_ + ":" + std::to_string(it->second.line);
        return InstanceError(where + ": field '" + key + "': " + msg);
    }

    const json& get(const std::string& key)
    {
        const auto it = entries_.find(key);
        if (it == entries_.end())
            throw InstanceError(path_ + ": missing field '" + key + "'");
        used_.push_back(key);
        return it->second.value;
    }

    double number(const json& v, const std::string& key, const std::string& what) const
    {
        if (!v.is_number())
            throw error(key, what + " must be a number");
        return v.get<double>();
    }

    int integer(const json& v, const std::string& key, const std::string& what) const
    {
        if (!v.is_number_integer())
            throw error(key, what + " must be an integer");
        return v.get<int>();
    }

    void reject_unknown() const
    {
        for (const auto& [k, e] : entries_)
            if (std::find(used_.begin(), used_.end(), k) == used_.end())
                throw InstanceError(path_ + ":" + std::to_string(e.line) + ": unknown field '" + k + "'");
    }

private:
    std::string path_;
    std::map<std::string, RawEntry> entries_;
    std::vector<std::string> used_;
};

inline Matrix block_matrix(Reader& r, const json& v, int dim, const std::string& key)
{
    if (!v.is_array() || v.size() != static_cast<std::size_t>(2 * dim * dim))
        throw r.error(key, "a " + std::to_string(dim) + "x" + std::to_string(dim) + " block needs " +
                               std::to_string(2 * dim * dim) + " numbers (re, im pairs, row-major)");
    Matrix m(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            const std::size_t at = 2 * static_cast<std::size_t>(i * dim + j);
            m(i, j) = cplx(r.number(v[at], key, "entry"), r.number(v[at + 1], key, "entry"));
        }
    return m;
}

inline Element operator_value(Reader& r, const AlgebraSpec& A, const json& v, const std::string& key)
{
    if (!v.is_array())
        throw r.error(key, "operator must be an array");
    const bool single = A.num_blocks() == 1 && !v.empty() && v[0].is_number();
    if (single)
        return Element({block_matrix(r, v, A.dim(0), key)});
    if (v.size() != A.num_blocks())
        throw r.error(key, "operator needs one entry per block (" + std::to_string(A.num_blocks()) + ")");
    std::vector<Matrix> blocks;
    for (std::size_t i = 0; i < A.num_blocks(); ++i)
        blocks.push_back(block_matrix(r, v[i], A.dim(i), key));
    return Element(std::move(blocks));
}

inline Element eigenpairs_value(Reader& r, const AlgebraSpec& A, const json& v, const std::string& key)
{
    if (!v.is_array() || v.empty())
        throw r.error(key, "eigenpairs must be a nonempty array");
    Element x = Element::zero(A);
    std::vector<Matrix> blocks = x.blocks();
    for (const auto& p : v) {
        if (!p.is_object() || !p.contains("value") || !p.contains("vector"))
            throw r.error(key, "each eigenpair needs 'value' and 'vector'");
        const int blk = p.contains("block") ? r.integer(p["block"], key, "block") : 0;
        if (blk < 0 || static_cast<std::size_t>(blk) >= A.num_blocks())
            throw r.error(key, "block index out of range");
        const int dim = A.dim(blk);
        const double lambda = r.number(p["value"], key, "eigenvalue");
        const json& vec = p["vector"];
        if (!vec.is_array() || vec.size() != static_cast<std::size_t>(2 * dim))
            throw r.error(key, "vector needs " + std::to_string(2 * dim) + " numbers (re, im pairs)");
        Eigen::VectorXcd e(dim);
        for (int i = 0; i < dim; ++i)
            e[i] = cplx(r.number(vec[2 * i], key, "entry"), r.number(vec[2 * i + 1], key, "entry"));
        const double n = e.norm();
        if (!(n > 0.0))
            throw r.error(key, "eigenvector must be nonzero");
        e /= n;
        blocks[blk] += lambda * e * e.adjoint();
    }
    return Element(std::move(blocks));
}

inline Element element_value(Reader& r, const Instance& inst, const json& v, const std::string& key)
{
    const AlgebraSpec& A = inst.derivation.algebra();
    if (v.is_object()) {
        if (v.size() != 1 || !v.contains("eigenpairs"))
            throw r.error(key, "object form must be {\"eigenpairs\": [...]}");
        return eigenpairs_value(r, A, v["eigenpairs"], key);
    }
    if (inst.kind == "graph") {
        if (!v.is_array() || v.size() != A.num_blocks())
            throw r.error(key, "needs one value per node (" + std::to_string(A.num_blocks()) + ")");
        std::vector<double> vals;
        for (const auto& x : v)
            vals.push_back(r.number(x, key, "node value"));
        return Element::diagonal(vals);
    }
    return operator_value(r, A, v, key);
}

inline Density density_value(Reader& r, const Instance& inst, const std::string& key)
{
    const Element x = element_value(r, inst, r.get(key), key);
    if (!x.hermitian())
        throw r.error(key, "density must be hermitian");
    if (eigh(x).min_value() < -kClampTol)
        throw r.error(key, "density must be positive semidefinite");
    try {
        return Density::normalized(inst.derivation.algebra(), x);
    } catch (const Error& e) {
        throw r.error(key, e.what());
    }
}

inline Derivation graph_derivation(Reader& r)
{
    const int nodes = r.integer(r.get("nodes"), "nodes", "node count");
    if (nodes < 1 || nodes > 4096)
        throw r.error("nodes", "node count must be in [1, 4096]");
    std::vector<double> m(nodes, 1.0);
    if (r.has("m")) {
        const json& mv = r.get("m");
        if (!mv.is_array() || mv.size() != static_cast<std::size_t>(nodes))
            throw r.error("m", "needs one positive weight per node");
        for (int i = 0; i < nodes; ++i)
            m[i] = r.number(mv[i], "m", "node weight");
    }
    const json& bv = r.get("b");
    if (!bv.is_array())
        throw r.error("b", "must be an array of (i, j, weight) triples");
    std::vector<std::tuple<int, int, double>> edges;
    for (const auto& e : bv) {
        if (!e.is_array() || e.size() != 3)
            throw r.error("b", "each edge must be (i, j, weight)");
        edges.emplace_back(r.integer(e[0], "b", "edge endpoint"), r.integer(e[1], "b", "edge endpoint"),
                           r.number(e[2], "b", "edge weight"));
    }
    try {
        return Derivation::graph(make_graph(nodes, edges, m));
    } catch (const Error& e) {
        throw r.error("b", e.what());
    }
}

inline Derivation lindblad_derivation(Reader& r)
{
    const json& bv = r.get("blocks");
    if (!bv.is_array() || bv.empty())
        throw r.error("blocks", "must be a nonempty array of (dim, weight) pairs");
    std::vector<Block> blocks;
    for (const auto& b : bv) {
        if (!b.is_array() || b.size() != 2)
            throw r.error("blocks", "each block must be (dim, weight)");
        const int dim = r.integer(b[0], "blocks", "block dimension");
        if (dim < 1 || dim > 64)
            throw r.error("blocks", "block dimension must be in [1, 64]");
        blocks.push_back({dim, r.number(b[1], "blocks", "block weight")});
    }
    AlgebraSpec A;
    try {
        A = AlgebraSpec(blocks);
    } catch (const Error& e) {
        throw r.error("blocks", e.what());
    }
    const json& jv = r.get("jumps");
    if (!jv.is_array() || jv.empty())
        throw r.error("jumps", "must be a nonempty array of operators");
    std::vector<Element> jumps;
    for (const auto& j : jv)
        jumps.push_back(operator_value(r, A, j, "jumps"));
    try {
        return Derivation::lindblad({A, std::move(jumps)});
    } catch (const Error& e) {
        throw r.error("jumps", e.what());
    }
}

} // namespace detail

inline Instance parse_instance(std::istream& in, const std::string& path)
{
    detail::Reader r(path, detail::read_entries(in, path));
    const auto& schema = r.get("schema");
    if (!schema.is_number_integer() || schema.get<int>() != 1)
        throw r.error("schema", "unsupported schema version (expected 1)");
    const auto& kind = r.get("kind");
    if (!kind.is_string() || (kind != "graph" && kind != "lindblad"))
        throw r.error("kind", "must be \"graph\" or \"lindblad\"");
    const bool graph = kind == "graph";
    Instance inst{path, kind.get<std::string>(),
                  graph ? detail::graph_derivation(r) : detail::lindblad_derivation(r), {}, {}, {}, {}};
    for (const char* key : {"rho0", "rho1"})
        if (r.has(key))
            (std::string(key) == "rho0" ? inst.rho0 : inst.rho1) = detail::density_value(r, inst, key);
    if (r.has("observable"))
        inst.observable = detail::element_value(r, inst, r.get("observable"), "observable");
    for (const char* key : {"name", "description"})
        if (r.has(key)) {
            const auto& v = r.get(key);
            if (!v.is_string())
                throw r.error(key, "must be a string");
            inst.labels[key] = v.get<std::string>();
        }
    r.reject_unknown();
    return inst;
}

inline Instance load_instance(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw InstanceError(path + ": cannot open instance file");
    return parse_instance(f, path);
}

} // namespace ncot::cli

#endif // NCOT_CLI_INSTANCE_HPP
