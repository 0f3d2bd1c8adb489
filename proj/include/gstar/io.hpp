#pragma once

#include <fstream>
#include <json.hpp>

#include "gstar/dyadic.hpp"
#include "gstar/kernel.hpp"
#include "gstar/quadrature.hpp"

namespace gstar {

using nlohmann::json;

inline json measure_to_json(const AtomicMeasure& mu) {
    json atoms = json::array();
    for (std::size_t i = 0; i < mu.size(); ++i) {
        json row = json::array();
        for (double c : mu.position(i)) row.push_back(c);
        row.push_back(mu.weight(i));
        atoms.push_back(std::move(row));
    }
    return json{{"n", mu.dim()}, {"atoms", std::move(atoms)}};
}

inline json measure_to_json(const SignedMeasure& nu) {
    json atoms = json::array();
    for (std::size_t i = 0; i < nu.size(); ++i) {
        json row = json::array();
        for (double c : nu.position(i)) row.push_back(c);
        row.push_back(nu.weight(i));
        atoms.push_back(std::move(row));
    }
    return json{{"n", nu.dim()}, {"signed_atoms", std::move(atoms)}};
}

namespace detail {

inline void parse_atom_rows(const json& rows, int n, std::vector<Point>& pos, std::vector<double>& w) {
    for (const json& row : rows) {
        if (!row.is_array() || static_cast<int>(row.size()) != n + 1)
            throw config_error("measure: each atom row must hold n coordinates plus a weight");
        Point p(n);
        for (int i = 0; i < n; ++i) p[i] = row[i].get<double>();
        pos.push_back(std::move(p));
        w.push_back(row[n].get<double>());
    }
}

} // namespace detail

inline AtomicMeasure measure_from_json(const json& j) {
    if (!j.contains("n") || !j.contains("atoms")) throw config_error("measure: expected keys 'n' and 'atoms'");
    const int n = j.at("n").get<int>();
    std::vector<Point> pos;
    std::vector<double> w;
    detail::parse_atom_rows(j.at("atoms"), n, pos, w);
    return AtomicMeasure(n, pos, w);
}

inline SignedMeasure signed_from_json(const json& j) {
    if (!j.contains("n") || !j.contains("signed_atoms"))
        throw config_error("measure: expected keys 'n' and 'signed_atoms'");
    const int n = j.at("n").get<int>();
    std::vector<Point> pos;
    std::vector<double> w;
    detail::parse_atom_rows(j.at("signed_atoms"), n, pos, w);
    return SignedMeasure(n, pos, w);
}

inline json kernel_to_json(const KernelSpec& k) {
    return json{{"m", k.m},
                {"alpha", k.alpha},
                {"kappa", k.kappa},
                {"family", family_name(k.family)},
                {"amplitude", k.amplitude}};
}

inline KernelSpec kernel_from_json(const json& j) {
    KernelSpec k;
    k.m = j.value("m", 1.0);
    k.alpha = j.value("alpha", 1.0);
    k.kappa = j.value("kappa", 2);
    k.amplitude = j.value("amplitude", 1.0);
    const std::string fam = j.value("family", "product_poisson");
    if (fam == "product_poisson") k.family = KernelFamily::ProductPoisson;
    else if (fam == "product_gaussian") k.family = KernelFamily::ProductGaussian;
    else throw config_error("kernel: unknown family '" + fam + "'");
    k.validate();
    return k;
}

inline json quadrature_to_json(const QuadratureSpec& q) {
    return json{{"t_min", q.t_min},
                {"t_max", q.t_max},
                {"nodes_per_decade", q.nodes_per_decade},
                {"prune_tol", q.prune_tol}};
}

inline QuadratureSpec quadrature_from_json(const json& j, const AtomicMeasure& mu) {
    QuadratureSpec q = default_quadrature(mu);
    q.t_min = j.value("t_min", q.t_min);
    q.t_max = j.value("t_max", q.t_max);
    q.nodes_per_decade = j.value("nodes_per_decade", q.nodes_per_decade);
    q.prune_tol = j.value("prune_tol", q.prune_tol);
    q.validate();
    return q;
}

inline json shift_to_json(const ShiftSequence& s) {
    json bits = json::array();
    for (const auto& level : s.bits()) bits.push_back(level);
    return json{{"seed", s.seed()}, {"j_min", s.j_min()}, {"j_max", s.j_max()}, {"bits", std::move(bits)}};
}

inline ShiftSequence shift_from_json(const json& j) {
    const int j_min = j.at("j_min").get<int>();
    const int j_max = j.at("j_max").get<int>();
    std::vector<std::vector<int>> bits;
    for (const json& level : j.at("bits")) bits.push_back(level.get<std::vector<int>>());
    return ShiftSequence::with_bits(j_min, j_max, bits);
}

// CSV output: '#'-prefixed provenance lines, one header row, then data rows.
// Numbers carry 17 significant digits; lines end with LF.
class CsvWriter {
public:
    void comment(const std::string& line) { comments_.push_back(line); }
    void header(std::vector<std::string> cols) { header_ = std::move(cols); }

    void row(const std::vector<double>& values) {
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(fmt17(require_finite(v, "csv output")));
        rows_.push_back(std::move(cells));
    }

    void row_text(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }

    std::string str() const {
        std::string out;
        for (const std::string& c : comments_) out += "# " + c + "\n";
        out += join(header_);
        for (const auto& r : rows_) out += join(r);
        return out;
    }

    void write(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw config_error("cannot open output file: " + path);
        f << str();
    }

private:
    static std::string join(const std::vector<std::string>& cells) {
        std::string line;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) line += ",";
            line += cells[i];
        }
        line += "\n";
        return line;
    }

    std::vector<std::string> comments_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

} // namespace gstar
