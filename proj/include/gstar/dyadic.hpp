#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "gstar/kernel.hpp"
#include "gstar/measure.hpp"

namespace gstar {

// Per-level binary shifts w_j in {0,1}^n for j in [j_min, j_max]. The shift of
// a level-k cube is sum_{j < k} 2^j w_j; levels outside the window contribute
// zero (sub-resolution shifts move every cube rigidly and change nothing that
// is tested, so the truncation is harmless).
class ShiftSequence {
public:
    ShiftSequence() = default;

    static ShiftSequence zero(int j_min, int j_max, int n) {
        ShiftSequence s;
        s.dim_ = n;
        s.j_min_ = j_min;
        s.j_max_ = j_max;
        s.bits_.assign(j_max - j_min + 1, std::vector<int>(n, 0));
        s.build_prefix();
        return s;
    }

    static ShiftSequence sample(std::uint64_t seed, int j_min, int j_max, int n) {
        if (j_min > j_max) throw config_error("shift: j_min must be <= j_max");
        ShiftSequence s = zero(j_min, j_max, n);
        s.seed_ = seed;
        Rng rng(seed);
        for (auto& level : s.bits_)
            for (int& b : level) b = rng.bit();
        s.build_prefix();
        return s;
    }

    static ShiftSequence with_bits(int j_min, int j_max, std::vector<std::vector<int>> bits) {
        ShiftSequence s;
        s.dim_ = bits.empty() ? 1 : static_cast<int>(bits.front().size());
        s.j_min_ = j_min;
        s.j_max_ = j_max;
        if (static_cast<int>(bits.size()) != j_max - j_min + 1)
            throw config_error("shift: bits must cover [j_min, j_max]");
        s.bits_ = std::move(bits);
        s.build_prefix();
        return s;
    }

    int dim() const { return dim_; }
    int j_min() const { return j_min_; }
    int j_max() const { return j_max_; }
    std::uint64_t seed() const { return seed_; }
    const std::vector<std::vector<int>>& bits() const { return bits_; }

    int bit_at(int level, int coord) const {
        if (level < j_min_ || level > j_max_) return 0;
        return bits_[level - j_min_][coord];
    }

    // S_k = sum_{j_min <= j < k} 2^j w_j
    Point cumulative_shift(int level) const {
        const int idx = std::clamp(level - j_min_, 0, static_cast<int>(prefix_.size()) - 1);
        return prefix_[idx];
    }

private:
    void build_prefix() {
        prefix_.assign(bits_.size() + 1, Point(dim_, 0.0));
        for (std::size_t l = 0; l < bits_.size(); ++l) {
            prefix_[l + 1] = prefix_[l];
            const double scale = std::ldexp(1.0, j_min_ + static_cast<int>(l));
            for (int i = 0; i < dim_; ++i) prefix_[l + 1][i] += scale * bits_[l][i];
        }
    }

    int dim_ = 1;
    int j_min_ = 0;
    int j_max_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<std::vector<int>> bits_;
    std::vector<Point> prefix_;
};

inline long long floor_div2(long long a) { return a >= 0 ? a / 2 : (a - 1) / 2; }

// Combinatorial dyadic cube: level k (sidelength 2^k), integer index, and the
// grid it lives in (nullptr for the standard grid D_0). Parent/child indices
// account for the shift bits so navigation stays inside one grid.
struct DyadicCube {
    int level = 0;
    std::vector<long long> index;
    const ShiftSequence* grid = nullptr;

    int dim() const { return static_cast<int>(index.size()); }

    Cube realize() const {
        const double side = std::ldexp(1.0, level);
        Point corner(dim());
        const Point shift = grid ? grid->cumulative_shift(level) : Point(dim(), 0.0);
        for (int i = 0; i < dim(); ++i)
            corner[i] = std::ldexp(static_cast<double>(index[i]), level) + shift[i];
        return Cube::from_corner(corner, side);
    }

    DyadicCube parent() const {
        DyadicCube p{level + 1, index, grid};
        for (int i = 0; i < dim(); ++i) {
            const int w = grid ? grid->bit_at(level, i) : 0;
            p.index[i] = floor_div2(index[i] - w);
        }
        return p;
    }

    DyadicCube ancestor(int up) const {
        DyadicCube a = *this;
        for (int k = 0; k < up; ++k) a = a.parent();
        return a;
    }

    std::vector<DyadicCube> children() const {
        std::vector<DyadicCube> out;
        const int n = dim();
        for (int mask = 0; mask < (1 << n); ++mask) {
            DyadicCube c{level - 1, index, grid};
            for (int i = 0; i < n; ++i) {
                const int w = grid ? grid->bit_at(level - 1, i) : 0;
                c.index[i] = 2 * index[i] + w + ((mask >> i) & 1);
            }
            out.push_back(std::move(c));
        }
        return out;
    }

    bool operator==(const DyadicCube& o) const { return level == o.level && index == o.index; }
};

inline DyadicCube containing_cube(PointRef x, int level, const ShiftSequence* grid) {
    DyadicCube c{level, std::vector<long long>(x.size()), grid};
    const double side = std::ldexp(1.0, level);
    const Point shift = grid ? grid->cumulative_shift(level) : Point(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i)
        c.index[i] = static_cast<long long>(std::floor((x[i] - shift[i]) / side));
    return c;
}

struct GoodnessParams {
    int r = 4;              // separation parameter
    double gamma = 0.25;

    static GoodnessParams from_kernel(const KernelSpec& spec, int r) {
        return GoodnessParams{r, spec.alpha / (2.0 * (spec.m + spec.alpha))};
    }
};

struct GoodnessReport {
    bool good = false;       // good within the searched window only
    int witness_level = 0;   // level of the best candidate J
    double distance = 0.0;
    double threshold = 0.0;
};

// A cube is good-in-window when some ancestor J with l(J) >= 2^r l(I), up to
// l(J) = 2^(k + search_levels), satisfies dist(I, dJ) > l(I)^g l(J)^(1-g).
// Candidates are the ancestors: same-grid cubes are nested or disjoint, and
// only containing cubes make the distance test meaningful.
inline GoodnessReport is_good(const DyadicCube& c, const GoodnessParams& gp, int search_levels) {
    if (search_levels < gp.r) throw config_error("is_good: search_levels must be >= r");
    const Cube self = c.realize();
    const double li = std::ldexp(1.0, c.level);
    GoodnessReport rep;
    double best_margin = -INFINITY;
    DyadicCube j = c.ancestor(gp.r);
    for (int up = gp.r; up <= search_levels; ++up, j = j.parent()) {
        const Cube big = j.realize();
        double d = INFINITY;
        for (int i = 0; i < c.dim(); ++i)
            d = std::min({d, self.lo(i) - big.lo(i), big.hi(i) - self.hi(i)});
        const double lj = std::ldexp(1.0, c.level + up);
        const double threshold = std::pow(li, gp.gamma) * std::pow(lj, 1.0 - gp.gamma);
        if (d - threshold > best_margin) {
            best_margin = d - threshold;
            rep.witness_level = c.level + up;
            rep.distance = d;
            rep.threshold = threshold;
        }
        if (d > threshold) {
            rep.good = true;
            rep.witness_level = c.level + up;
            rep.distance = d;
            rep.threshold = threshold;
            break;
        }
    }
    return rep;
}

struct BadProbEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    int trials = 0;
};

// Fraction of sampled shifts under which the fixed D_0 cube, carried into the
// shifted grid, is bad-in-window.
inline BadProbEstimate bad_cube_probability(int level, const std::vector<long long>& index, int n,
                                            const GoodnessParams& gp, int search_levels, int trials,
                                            std::uint64_t seed,
                                            const ShiftSequence* forced = nullptr) {
    if (trials < 1) throw config_error("bad_cube_probability: trials must be >= 1");
    int bad = 0;
    for (int k = 0; k < trials; ++k) {
        ShiftSequence w = forced ? *forced
                                 : ShiftSequence::sample(Rng::stream(seed, k).word(), level,
                                                         level + search_levels, n);
        DyadicCube c{level, index, &w};
        if (!is_good(c, gp, search_levels).good) ++bad;
    }
    BadProbEstimate e;
    e.trials = trials;
    e.estimate = static_cast<double>(bad) / trials;
    e.std_error = std::sqrt(e.estimate * (1.0 - e.estimate) / trials);
    return e;
}

namespace detail {

// Atom ids grouped by the level-k cube containing them.
inline std::map<std::vector<long long>, std::vector<std::size_t>>
occupied_cubes(const AtomicMeasure& mu, int level, const ShiftSequence* grid) {
    std::map<std::vector<long long>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < mu.size(); ++i)
        groups[containing_cube(mu.position(i), level, grid).index].push_back(i);
    return groups;
}

inline double group_average(const AtomicMeasure& mu, const SampledFunction& f,
                            const std::vector<std::size_t>& ids, bool absolute = false) {
    double num = 0.0, den = 0.0;
    for (std::size_t i : ids) {
        num += (absolute ? std::abs(f.values[i]) : f.values[i]) * mu.weight(i);
        den += mu.weight(i);
    }
    return den > 0.0 ? num / den : 0.0;
}

} // namespace detail

// Martingale difference Delta_Q f = sum_{Q' in ch(Q)} (<f>_Q' - <f>_Q) 1_Q'.
// Zero outside Q and whenever mu(Q) = 0.
inline SampledFunction martingale_diff(const SampledFunction& f, const DyadicCube& q,
                                       const AtomicMeasure& mu) {
    std::vector<double> out(mu.size(), 0.0);
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < mu.size(); ++i)
        if (containing_cube(mu.position(i), q.level, q.grid).index == q.index) members.push_back(i);
    if (members.empty()) return SampledFunction(mu, std::move(out));
    const double avg_q = detail::group_average(mu, f, members);
    std::map<std::vector<long long>, std::vector<std::size_t>> by_child;
    for (std::size_t i : members)
        by_child[containing_cube(mu.position(i), q.level - 1, q.grid).index].push_back(i);
    for (const auto& [idx, ids] : by_child) {
        const double avg_c = detail::group_average(mu, f, ids);
        for (std::size_t i : ids) out[i] = avg_c - avg_q;
    }
    return SampledFunction(mu, std::move(out));
}

// E_Q f = <f>_Q 1_Q
inline SampledFunction cube_avg(const SampledFunction& f, const DyadicCube& q, const AtomicMeasure& mu) {
    std::vector<double> out(mu.size(), 0.0);
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < mu.size(); ++i)
        if (containing_cube(mu.position(i), q.level, q.grid).index == q.index) members.push_back(i);
    if (members.empty()) return SampledFunction(mu, std::move(out));
    const double avg = detail::group_average(mu, f, members);
    for (std::size_t i : members) out[i] = avg;
    return SampledFunction(mu, std::move(out));
}

// E_{2^k} f: conditional expectation at scale 2^k.
inline SampledFunction level_avg(const SampledFunction& f, int level, const AtomicMeasure& mu,
                                 const ShiftSequence* grid) {
    std::vector<double> out(mu.size(), 0.0);
    for (const auto& [idx, ids] : detail::occupied_cubes(mu, level, grid)) {
        const double avg = detail::group_average(mu, f, ids);
        for (std::size_t i : ids) out[i] = avg;
    }
    return SampledFunction(mu, std::move(out));
}

// All occupied cubes at levels [finest, top], as (level, index, atom ids).
struct OccupiedCube {
    DyadicCube cube;
    std::vector<std::size_t> atoms;
};

inline std::vector<OccupiedCube> occupied_range(const AtomicMeasure& mu, int finest, int top,
                                                const ShiftSequence* grid) {
    std::vector<OccupiedCube> out;
    for (int level = finest; level <= top; ++level)
        for (auto& [idx, ids] : detail::occupied_cubes(mu, level, grid))
            out.push_back({DyadicCube{level, idx, grid}, ids});
    return out;
}

// Reassembles f from martingale differences at levels (finest, top] plus the
// top-level averages: the finite-atom realisation of the L^2 expansion.
inline SampledFunction reconstruct(const SampledFunction& f, int top, int finest,
                                   const AtomicMeasure& mu, const ShiftSequence* grid) {
    if (finest > top) throw config_error("reconstruct: finest level must be <= top level");
    std::vector<double> out(mu.size(), 0.0);
    for (int level = finest; level <= top; ++level) {
        const auto groups = detail::occupied_cubes(mu, level, grid);
        for (const auto& [idx, ids] : groups) {
            const double avg_q = detail::group_average(mu, f, ids);
            if (level == top)
                for (std::size_t i : ids) out[i] += avg_q;
            std::map<std::vector<long long>, std::vector<std::size_t>> by_child;
            for (std::size_t i : ids)
                by_child[containing_cube(mu.position(i), level - 1, grid).index].push_back(i);
            for (const auto& [cidx, cids] : by_child) {
                const double avg_c = detail::group_average(mu, f, cids);
                for (std::size_t i : cids) out[i] += avg_c - avg_q;
            }
        }
    }
    return SampledFunction(mu, std::move(out));
}

// Level below which every atom sits alone in its cube (and in the double of
// its cube), so all finer martingale differences vanish.
inline int isolation_level(const AtomicMeasure& mu) {
    return static_cast<int>(std::floor(std::log2(mu.min_pairwise_distance() / 4.0)));
}

inline int top_level(const AtomicMeasure& mu) {
    auto [lo, hi] = mu.bounding_box();
    double span = 1.0;
    for (int i = 0; i < mu.dim(); ++i) span = std::max({span, std::abs(lo[i]), std::abs(hi[i])});
    return static_cast<int>(std::ceil(std::log2(span))) + 1;
}

// delta(Q, R) = l(Q)^(a/2) l(R)^(a/2) / D(Q,R)^(m+a), D = l(Q)+l(R)+d(Q,R).
inline double interaction_coeff(const Cube& q, const Cube& r, double m, double alpha) {
    if (!(q.side > 0.0) || !(r.side > 0.0)) throw config_error("interaction_coeff: sides must be positive");
    const double dqr = q.side + r.side + cube_gap(q, r);
    return std::pow(q.side, alpha / 2.0) * std::pow(r.side, alpha / 2.0) / std::pow(dqr, m + alpha);
}

// Principal (stopping) cubes of |phi|: generation k+1 collects the maximal
// dyadic cubes inside a generation-k cube whose average at least doubles.
struct StoppingCube {
    DyadicCube cube;
    std::vector<std::size_t> atoms;
    double avg = 0.0;        // <|phi|>_F
    double mass = 0.0;
    int generation = 0;
    int parent = -1;         // index into StoppingFamily::cubes, -1 for roots
};

class StoppingFamily {
public:
    std::vector<StoppingCube> cubes;
    int generations = 0;

    // a(Q): minimal stopping cube containing Q (walks Q's ancestor chain).
    std::optional<std::size_t> assigned(const DyadicCube& q, int top) const {
        DyadicCube walk = q;
        while (walk.level <= top) {
            auto it = lookup_.find({walk.level, walk.index});
            if (it != lookup_.end()) return it->second;
            if (walk.level == top) break;
            walk = walk.parent();
        }
        return std::nullopt;
    }

    void index_cubes() {
        lookup_.clear();
        for (std::size_t i = 0; i < cubes.size(); ++i)
            lookup_[{cubes[i].cube.level, cubes[i].cube.index}] = i;
    }

private:
    std::map<std::pair<int, std::vector<long long>>, std::size_t> lookup_;
};

inline StoppingFamily principal_cubes(const SampledFunction& phi, const AtomicMeasure& mu,
                                      const ShiftSequence* grid, int top) {
    StoppingFamily fam;
    const int floor_level = isolation_level(mu) - 1;

    auto mass_of = [&](const std::vector<std::size_t>& ids) {
        double s = 0.0;
        for (std::size_t i : ids) s += mu.weight(i);
        return s;
    };

    // F_0: occupied cubes at the top level.
    for (auto& [idx, ids] : detail::occupied_cubes(mu, top, grid)) {
        StoppingCube sc{DyadicCube{top, idx, grid}, ids,
                        detail::group_average(mu, phi, ids, true), mass_of(ids), 0, -1};
        fam.cubes.push_back(std::move(sc));
    }
    fam.generations = fam.cubes.empty() ? 0 : 1;

    // Search below F for maximal cubes whose |phi|-average exceeds 2 <|phi|>_F.
    // A cube whose max |phi| is already <= the threshold cannot spawn one.
    std::size_t head = 0;
    while (head < fam.cubes.size()) {
        const std::size_t fi = head++;
        const double bar = 2.0 * fam.cubes[fi].avg;
        const int gen = fam.cubes[fi].generation;

        std::vector<std::pair<DyadicCube, std::vector<std::size_t>>> frontier;
        // start from the children of F
        {
            std::map<std::vector<long long>, std::vector<std::size_t>> by_child;
            for (std::size_t i : fam.cubes[fi].atoms)
                by_child[containing_cube(mu.position(i), fam.cubes[fi].cube.level - 1, grid).index]
                    .push_back(i);
            for (auto& [idx, ids] : by_child)
                frontier.push_back({DyadicCube{fam.cubes[fi].cube.level - 1, idx, grid}, ids});
        }
        while (!frontier.empty()) {
            auto [cube, ids] = std::move(frontier.back());
            frontier.pop_back();
            const double avg = detail::group_average(mu, phi, ids, true);
            if (avg > bar) {
                StoppingCube sc{cube, ids, avg, mass_of(ids), gen + 1, static_cast<int>(fi)};
                fam.cubes.push_back(std::move(sc));
                fam.generations = std::max(fam.generations, gen + 2);
                continue;
            }
            if (cube.level <= floor_level) continue;
            double peak = 0.0;
            for (std::size_t i : ids) peak = std::max(peak, std::abs(phi.values[i]));
            if (peak <= bar) continue;
            std::map<std::vector<long long>, std::vector<std::size_t>> by_child;
            for (std::size_t i : ids)
                by_child[containing_cube(mu.position(i), cube.level - 1, grid).index].push_back(i);
            for (auto& [idx, cids] : by_child)
                frontier.push_back({DyadicCube{cube.level - 1, idx, grid}, cids});
        }
    }
    fam.index_cubes();
    return fam;
}

struct CarlesonReport {
    double worst_packing_ratio = 0.0;   // max_F sum_{F' subset F} mu(F') / mu(F)
    double min_core_fraction = 1.0;     // min_F mu(E(F)) / mu(F)
    std::size_t family_size = 0;
};

inline CarlesonReport carleson_check(const StoppingFamily& fam, const AtomicMeasure& mu) {
    (void)mu;
    CarlesonReport rep;
    rep.family_size = fam.cubes.size();
    if (fam.cubes.empty()) return rep;
    std::vector<double> packed(fam.cubes.size(), 0.0);
    std::vector<double> child_mass(fam.cubes.size(), 0.0);
    for (std::size_t i = 0; i < fam.cubes.size(); ++i) {
        for (int j = static_cast<int>(i); j >= 0; j = fam.cubes[j].parent)
            packed[j] += fam.cubes[i].mass;
        if (fam.cubes[i].parent >= 0) child_mass[fam.cubes[i].parent] += fam.cubes[i].mass;
    }
    for (std::size_t i = 0; i < fam.cubes.size(); ++i) {
        rep.worst_packing_ratio = std::max(rep.worst_packing_ratio, packed[i] / fam.cubes[i].mass);
        rep.min_core_fraction = std::min(rep.min_core_fraction,
                                         (fam.cubes[i].mass - child_mass[i]) / fam.cubes[i].mass);
    }
    return rep;
}

} // namespace gstar
