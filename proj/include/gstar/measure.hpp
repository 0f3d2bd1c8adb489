#pragma once

#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "gstar/geometry.hpp"
#include "gstar/rng.hpp"

namespace gstar {

namespace detail {

// Shared storage for finitely atomic measures: flat position array plus one
// weight per atom. Duplicate positions (exact binary equality) are merged at
// construction with weights summed.
class AtomStore {
public:
    AtomStore() = default;

    AtomStore(int dim, const std::vector<Point>& pos, const std::vector<double>& w) : dim_(dim) {
        if (pos.size() != w.size()) throw config_error("atom positions and weights differ in length");
        std::map<Point, double> merged;
        for (std::size_t i = 0; i < pos.size(); ++i) {
            if (static_cast<int>(pos[i].size()) != dim) throw config_error("atom position has wrong dimension");
            merged[pos[i]] += w[i];
        }
        for (auto& [p, wt] : merged) {
            coords_.insert(coords_.end(), p.begin(), p.end());
            weights_.push_back(wt);
        }
    }

    int dim() const { return dim_; }
    std::size_t size() const { return weights_.size(); }
    PointRef position(std::size_t i) const { return PointRef(coords_.data() + i * dim_, dim_); }
    double weight(std::size_t i) const { return weights_[i]; }
    const std::vector<double>& weights() const { return weights_; }

    // Tight bounding box of the support; empty measures get a unit box at 0.
    std::pair<Point, Point> bounding_box() const {
        Point lo(dim_, 0.0), hi(dim_, 0.0);
        if (size() == 0) { for (int i = 0; i < dim_; ++i) hi[i] = 1.0; return {lo, hi}; }
        for (int i = 0; i < dim_; ++i) lo[i] = hi[i] = coords_[i];
        for (std::size_t a = 1; a < size(); ++a) {
            PointRef p = position(a);
            for (int i = 0; i < dim_; ++i) {
                lo[i] = std::min(lo[i], p[i]);
                hi[i] = std::max(hi[i], p[i]);
            }
        }
        return {lo, hi};
    }

    double support_diameter() const {
        double best = 0.0;
        for (std::size_t a = 0; a < size(); ++a)
            for (std::size_t b = a + 1; b < size(); ++b)
                best = std::max(best, dist_sq(position(a), position(b)));
        return std::sqrt(best);
    }

    double min_pairwise_distance() const {
        if (size() < 2) return 1.0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < size(); ++a)
            for (std::size_t b = a + 1; b < size(); ++b)
                best = std::min(best, dist_sq(position(a), position(b)));
        return std::sqrt(best);
    }

    // Robust resolution scale: the median nearest-neighbour distance.
    double median_nn_distance() const {
        if (size() < 2) return 1.0;
        std::vector<double> nn(size(), std::numeric_limits<double>::infinity());
        for (std::size_t a = 0; a < size(); ++a)
            for (std::size_t b = 0; b < size(); ++b)
                if (a != b) nn[a] = std::min(nn[a], dist_sq(position(a), position(b)));
        std::nth_element(nn.begin(), nn.begin() + nn.size() / 2, nn.end());
        return std::sqrt(nn[nn.size() / 2]);
    }

protected:
    int dim_ = 1;
    std::vector<double> coords_;
    std::vector<double> weights_;
};

} // namespace detail

// Nonnegative finitely atomic measure: the discrete stand-in for mu. All
// space integrals against it are exact finite sums.
class AtomicMeasure : public detail::AtomStore {
public:
    AtomicMeasure() = default;

    AtomicMeasure(int dim, const std::vector<Point>& pos, const std::vector<double>& w)
        : detail::AtomStore(dim, pos, w) {
        for (double wt : weights_)
            if (!(wt > 0.0)) throw config_error("atomic measure weights must be strictly positive");
    }

    double total_mass() const {
        double s = 0.0;
        for (double w : weights_) s += w;
        return s;
    }

    template <class Region>
    double mass(const Region& s) const {
        double m = 0.0;
        for (std::size_t i = 0; i < size(); ++i)
            if (s.contains(position(i))) m += weight(i);
        return m;
    }
};

// Real (signed) finitely atomic measure, the stand-in for nu. Atoms whose
// merged weight is exactly zero are dropped.
class SignedMeasure : public detail::AtomStore {
public:
    SignedMeasure() = default;

    SignedMeasure(int dim, const std::vector<Point>& pos, const std::vector<double>& w)
        : detail::AtomStore(dim, pos, w) {
        std::size_t out = 0;
        for (std::size_t i = 0; i < size(); ++i) {
            if (weights_[i] == 0.0) continue;
            if (out != i) {
                for (int d = 0; d < dim_; ++d) coords_[out * dim_ + d] = coords_[i * dim_ + d];
                weights_[out] = weights_[i];
            }
            ++out;
        }
        coords_.resize(out * dim_);
        weights_.resize(out);
    }

    double total_mass() const {
        double s = 0.0;
        for (double w : weights_) s += w;
        return s;
    }

    // ||nu|| = |nu|(R^n)
    double total_variation() const {
        double s = 0.0;
        for (double w : weights_) s += std::abs(w);
        return s;
    }

    template <class Region>
    double mass(const Region& s) const {
        double m = 0.0;
        for (std::size_t i = 0; i < size(); ++i)
            if (s.contains(position(i))) m += weight(i);
        return m;
    }

    template <class Region>
    double variation(const Region& s) const {
        double m = 0.0;
        for (std::size_t i = 0; i < size(); ++i)
            if (s.contains(position(i))) m += std::abs(weight(i));
        return m;
    }
};

// f nu for a function sampled on nu's atoms.
inline SignedMeasure density_measure(const AtomicMeasure& mu, const std::vector<double>& values) {
    if (values.size() != mu.size()) throw config_error("density values must match atom count");
    std::vector<Point> pos;
    std::vector<double> w;
    pos.reserve(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
        PointRef p = mu.position(i);
        pos.emplace_back(p.begin(), p.end());
        w.push_back(values[i] * mu.weight(i));
    }
    return SignedMeasure(mu.dim(), pos, w);
}

// Values assigned to the atoms of a measure.
struct SampledFunction {
    const AtomicMeasure* base = nullptr;
    std::vector<double> values;

    SampledFunction() = default;
    SampledFunction(const AtomicMeasure& mu, std::vector<double> v) : base(&mu), values(std::move(v)) {
        if (values.size() != mu.size()) throw config_error("sampled function length must match atom count");
    }

    static SampledFunction constant(const AtomicMeasure& mu, double c) {
        return SampledFunction(mu, std::vector<double>(mu.size(), c));
    }

    static SampledFunction indicator(const AtomicMeasure& mu, const Cube& q) {
        std::vector<double> v(mu.size(), 0.0);
        for (std::size_t i = 0; i < mu.size(); ++i)
            if (q.contains(mu.position(i))) v[i] = 1.0;
        return SampledFunction(mu, v);
    }

    double operator()(std::size_t i) const { return values[i]; }

    // f 1_Q (inside=true) or f 1_{Q^c} (inside=false).
    SampledFunction restricted(const Cube& q, bool inside) const {
        std::vector<double> v(values);
        for (std::size_t i = 0; i < base->size(); ++i)
            if (q.contains(base->position(i)) != inside) v[i] = 0.0;
        return SampledFunction(*base, std::move(v));
    }

    double integral() const {
        double s = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) s += values[i] * base->weight(i);
        return s;
    }

    // ||f||_{L^p(mu)}^p as an exact weighted sum.
    double lp_norm_pow(double p) const {
        double s = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
            s += std::pow(std::abs(values[i]), p) * base->weight(i);
        return s;
    }

    double l2_norm_sq() const {
        double s = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) s += values[i] * values[i] * base->weight(i);
        return s;
    }
};

struct PowerBoundReport {
    double exponent = 1.0;
    double constant = 0.0;
    Point worst_center;
    double worst_radius = 0.0;
    std::size_t samples = 0;
};

// Samples for the power-bound scan: an explicit (x, r) list, or a seeded
// random draw with centers uniform over the padded bounding box and radii
// log-uniform across the resolved scales.
struct PowerBoundSamples {
    std::vector<std::pair<Point, double>> pairs;
    int random_count = 0;
    std::uint64_t seed = 0;
};

inline PowerBoundReport check_power_bound(const AtomicMeasure& mu, double m, const PowerBoundSamples& spec) {
    if (!(m > 0.0)) throw config_error("power bound exponent m must be positive");
    PowerBoundReport rep;
    rep.exponent = m;
    auto consider = [&](const Point& x, double r) {
        const double ratio = mu.mass(Ball(x, r)) / std::pow(r, m);
        ++rep.samples;
        if (ratio > rep.constant) {
            rep.constant = ratio;
            rep.worst_center = x;
            rep.worst_radius = r;
        }
    };
    for (const auto& [x, r] : spec.pairs) consider(x, r);
    if (spec.random_count > 0 && mu.size() > 0) {
        Rng rng(spec.seed);
        auto [lo, hi] = mu.bounding_box();
        const double pad = 0.5 * (1.0 + mu.support_diameter());
        const double rmin = mu.min_pairwise_distance() / 4.0;
        const double rmax = 4.0 * (mu.support_diameter() + 1.0);
        for (int k = 0; k < spec.random_count; ++k) {
            Point x(mu.dim());
            for (int i = 0; i < mu.dim(); ++i) x[i] = rng.uniform(lo[i] - pad, hi[i] + pad);
            consider(x, rng.log_uniform(rmin, rmax));
        }
    }
    return rep;
}

struct DoublingResult {
    bool doubling = true;
    double ratio = 1.0;   // mu(aQ)/mu(Q); +inf when mu(Q)=0 < mu(aQ), 1 when both vanish
};

inline DoublingResult is_doubling_cube(const AtomicMeasure& mu, const Cube& q, double a, double b) {
    const double inner = mu.mass(q);
    const double outer = mu.mass(q.dilated(a));
    DoublingResult r;
    if (inner == 0.0) {
        r.ratio = outer == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
        r.doubling = outer == 0.0;
    } else {
        r.ratio = outer / inner;
        r.doubling = outer <= b * inner;
    }
    return r;
}

inline std::vector<double> default_xi_grid() {
    std::vector<double> xs;
    for (int j = 0; j <= 12; ++j) xs.push_back(std::ldexp(1.0, -j));
    return xs;
}

// mu({x in 2Q : dist(x, dQ) <= xi l(Q)}) <= C xi mu(2Q) for every xi in the
// grid. The band membership is exact from atom coordinates.
inline bool has_small_boundary(const AtomicMeasure& mu, const Cube& q, double c,
                               const std::vector<double>& xi_grid) {
    if (xi_grid.empty()) throw config_error("small-boundary xi grid must be nonempty");
    const Cube q2 = q.dilated(2.0);
    for (double xi : xi_grid) {
        double band = 0.0, total = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            PointRef p = mu.position(i);
            if (!q2.contains(p)) continue;
            total += mu.weight(i);
            if (q.dist_to_boundary(p) <= xi * q.side) band += mu.weight(i);
        }
        if (band > c * xi * total) return false;
    }
    return true;
}

// Centered Hardy-Littlewood maximal function over the supplied radius grid;
// radii whose ball carries no mass are skipped.
inline double maximal_function(const AtomicMeasure& mu, const SampledFunction& f, PointRef x,
                               const std::vector<double>& radius_grid) {
    double best = 0.0;
    for (double r : radius_grid) {
        const double rr = r * r;
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            if (dist_sq(x, mu.position(i)) <= rr) {
                num += std::abs(f.values[i]) * mu.weight(i);
                den += mu.weight(i);
            }
        }
        if (den > 0.0) best = std::max(best, num / den);
    }
    return best;
}

inline std::vector<double> default_radius_grid(const AtomicMeasure& mu, int per_decade = 8) {
    const double rmin = mu.min_pairwise_distance() / 4.0;
    const double rmax = 4.0 * (mu.support_diameter() + 1.0);
    const int steps = std::max(1, static_cast<int>(std::ceil(per_decade * std::log10(rmax / rmin))));
    std::vector<double> rs(steps + 1);
    for (int j = 0; j <= steps; ++j)
        rs[j] = rmin * std::exp(j * std::log(rmax / rmin) / steps);
    return rs;
}

} // namespace gstar
