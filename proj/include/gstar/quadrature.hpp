#pragma once

#include <cmath>
#include <vector>

#include "gstar/measure.hpp"

namespace gstar {

// Discretisation of the t-axis. Everything in space is an exact sum over
// atoms; the dt/t integral is the only quadrature in the library. Nodes are
// the midpoints (in log t) of a uniform partition of [log t_min, log t_max],
// each carrying the exact cell width as weight.
struct QuadratureSpec {
    double t_min = 1e-3;
    double t_max = 1e3;
    int nodes_per_decade = 32;
    double prune_tol = 0.0;   // 0 disables spatial pruning

    void validate() const {
        if (!(t_min > 0.0) || !(t_min < t_max)) throw config_error("quadrature: need 0 < t_min < t_max");
        if (nodes_per_decade < 4) throw config_error("quadrature: nodes_per_decade must be >= 4");
        if (prune_tol < 0.0) throw config_error("quadrature: prune_tol must be >= 0");
    }
};

struct TimeGrid {
    std::vector<double> nodes;       // log-midpoints
    std::vector<double> boundaries;  // cell edges, nodes.size() + 1 of them
    double dlog = 0.0;               // uniform weight for the dt/t integral
};

inline TimeGrid make_grid(const QuadratureSpec& q) {
    q.validate();
    const double la = std::log(q.t_min), lb = std::log(q.t_max);
    const double decades = (lb - la) / std::log(10.0);
    const int count = std::max(1, static_cast<int>(std::ceil(q.nodes_per_decade * decades)));
    TimeGrid g;
    g.dlog = (lb - la) / count;
    g.boundaries.resize(count + 1);
    g.nodes.resize(count);
    for (int j = 0; j <= count; ++j) g.boundaries[j] = std::exp(la + j * g.dlog);
    for (int j = 0; j < count; ++j) g.nodes[j] = std::exp(la + (j + 0.5) * g.dlog);
    return g;
}

// Window wide enough that the integrand has provably decayed at both ends:
// like t^(2a) below the atom separation and t^(-2 kappa m) beyond the support.
inline QuadratureSpec default_quadrature(const AtomicMeasure& mu, int nodes_per_decade = 32) {
    QuadratureSpec q;
    q.t_min = mu.min_pairwise_distance() / 8.0;
    q.t_max = 8.0 * (mu.support_diameter() + 1.0);
    q.nodes_per_decade = nodes_per_decade;
    return q;
}

} // namespace gstar
