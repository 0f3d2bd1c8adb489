#pragma once

#include <algorithm>
#include <memory>
#include <numeric>
#include <sstream>

#include "gstar/dyadic.hpp"

namespace gstar {

// Finite union of open axis-aligned boxes. Coverage queries against closed
// boxes are decided exactly by sampling one representative per cell of the
// coordinate arrangement: box bounds never cut a cell, so membership is
// constant on each cell.
struct OpenBoxUnion {
    std::vector<std::pair<Point, Point>> boxes;   // (lo, hi), open

    int dim() const { return boxes.empty() ? 0 : static_cast<int>(boxes.front().first.size()); }
    bool empty() const {
        for (const auto& [lo, hi] : boxes)
            for (std::size_t i = 0; i < lo.size(); ++i)
                if (lo[i] < hi[i] && nonempty(lo, hi)) return false;
        return true;
    }

    static bool nonempty(const Point& lo, const Point& hi) {
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (!(lo[i] < hi[i])) return false;
        return true;
    }

    bool contains(PointRef p) const {
        for (const auto& [lo, hi] : boxes) {
            if (!nonempty(lo, hi)) continue;
            bool in = true;
            for (std::size_t i = 0; i < p.size(); ++i)
                if (!(p[i] > lo[i] && p[i] < hi[i])) { in = false; break; }
            if (in) return true;
        }
        return false;
    }

    // closed box [lo, hi] subset of the union?
    bool covers_closed(const Point& lo, const Point& hi) const {
        const int n = static_cast<int>(lo.size());
        std::vector<std::vector<double>> samples(n);
        for (int i = 0; i < n; ++i) {
            std::vector<double> cuts{lo[i], hi[i]};
            for (const auto& [blo, bhi] : boxes) {
                if (blo[i] > lo[i] && blo[i] < hi[i]) cuts.push_back(blo[i]);
                if (bhi[i] > lo[i] && bhi[i] < hi[i]) cuts.push_back(bhi[i]);
            }
            std::sort(cuts.begin(), cuts.end());
            cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
            for (std::size_t j = 0; j < cuts.size(); ++j) {
                samples[i].push_back(cuts[j]);
                if (j + 1 < cuts.size()) {
                    const double mid = cuts[j] + (cuts[j + 1] - cuts[j]) / 2.0;
                    if (mid > cuts[j] && mid < cuts[j + 1]) samples[i].push_back(mid);
                }
            }
        }
        std::vector<std::size_t> pick(n, 0);
        while (true) {
            Point p(n);
            for (int i = 0; i < n; ++i) p[i] = samples[i][pick[i]];
            if (!contains(p)) return false;
            int i = n - 1;
            while (i >= 0 && ++pick[i] == samples[i].size()) pick[i--] = 0;
            if (i < 0) break;
        }
        return true;
    }

    bool covers_cube(const Cube& c) const {
        Point lo(c.dim()), hi(c.dim());
        for (int i = 0; i < c.dim(); ++i) { lo[i] = c.lo(i); hi[i] = c.hi(i); }
        return covers_closed(lo, hi);
    }

    bool intersects_cube(const Cube& c) const {
        for (const auto& [blo, bhi] : boxes) {
            if (!nonempty(blo, bhi)) continue;
            bool hit = true;
            for (int i = 0; i < c.dim(); ++i)
                if (!(blo[i] < c.hi(i) && bhi[i] > c.lo(i))) { hit = false; break; }
            if (hit) return true;
        }
        return false;
    }

    // sup-norm distance from a point of the union to its complement, by
    // bisection on "is the closed sup-ball still covered".
    double dist_to_complement(PointRef x, double hi_cap) const {
        if (!contains(x)) return 0.0;
        double lo = 0.0, hi = hi_cap;
        Point blo(x.begin(), x.end()), bhi(x.begin(), x.end());
        auto covered = [&](double r) {
            for (std::size_t i = 0; i < x.size(); ++i) { blo[i] = x[i] - r; bhi[i] = x[i] + r; }
            return covers_closed(blo, bhi);
        };
        if (covered(hi)) return hi;
        for (int it = 0; it < 60 && hi - lo > 1e-14 * hi_cap; ++it) {
            const double mid = lo + (hi - lo) / 2.0;
            (covered(mid) ? lo : hi) = mid;
        }
        return lo;
    }
};

// Dyadic frame used by the decompositions: a root cube centred near the data
// that contains the requested span, realised as a shifted grid so that data
// straddling the origin still sits inside a single cube.
struct DyadicFrame {
    std::shared_ptr<const ShiftSequence> grid;
    DyadicCube root;

    Cube realized() const { return root.realize(); }
};

// One shift bit at level top-1 realises the root as [-2^(top-1), 2^(top-1))^n,
// a genuine cube of the system whose descendants below top-1 are standard.
inline DyadicFrame make_frame(const Point& lo, const Point& hi, double pad_factor) {
    const int n = static_cast<int>(lo.size());
    double span = 1.0;
    for (int i = 0; i < n; ++i) span = std::max({span, std::abs(lo[i]), std::abs(hi[i])});
    const int top = static_cast<int>(std::ceil(std::log2(pad_factor * span))) + 1;
    DyadicFrame f;
    f.grid = std::make_shared<ShiftSequence>(ShiftSequence::with_bits(
        top - 1, top - 1, std::vector<std::vector<int>>(1, std::vector<int>(n, 1))));
    f.root = DyadicCube{top, std::vector<long long>(n, -1), f.grid.get()};
    return f;
}

struct WhitneyEntry {
    DyadicCube cube;
    Cube realized;
};

struct WhitneyOptions {
    double rho = 21.0;
    double small_boundary_c = 0.0;     // 0: use 8n
    std::vector<double> xi_grid = default_xi_grid();
    std::optional<int> floor_level;    // finest recursion level override
};

struct WhitneyResult {
    std::shared_ptr<const ShiftSequence> frame;
    std::vector<WhitneyEntry> cubes;
    double rho = 21.0;
    int rho0 = 0;                       // realized overlap bound of the 10-dilations
    std::vector<std::size_t> subfamily; // indices into cubes
    std::vector<Cube> tilde;            // chosen expansions, aligned with subfamily
    std::vector<bool> predicates_ok;    // doubling + small boundary held for tilde[j]
    double omega_mass = 0.0;
    double tilde_mass = 0.0;
    bool property1_ok = true;
    bool property2_ok = true;
};

namespace detail {

// Maximal cubes with 10Q inside omega, found top-down. The background
// resolution stops at geo_floor; branches still holding uncovered atoms are
// followed further, down to atom_floor, so every atom of mu in omega ends up
// inside an emitted cube.
inline void whitney_collect(const DyadicCube& c, const OpenBoxUnion& omega,
                            const std::vector<Point>& atoms, int geo_floor, int atom_floor,
                            std::vector<WhitneyEntry>& out) {
    const Cube r = c.realize();
    if (!omega.intersects_cube(r)) return;
    if (omega.covers_cube(r.dilated(10.0))) {
        out.push_back({c, r});
        return;
    }
    bool holds_atom = false;
    for (const Point& a : atoms)
        if (r.contains(a)) { holds_atom = true; break; }
    if (c.level <= (holds_atom ? atom_floor : geo_floor)) return;
    for (const DyadicCube& child : c.children())
        whitney_collect(child, omega, atoms, geo_floor, atom_floor, out);
}

} // namespace detail

// Whitney decomposition of an open set, with the doubling subfamily selected
// greedily by mass. Property (c) holds with the realized overlap constant:
// every cube is either chosen or blocked by an earlier (heavier) choice, and
// a chosen cube blocks at most rho0 cubes.
inline WhitneyResult whitney(const OpenBoxUnion& omega, const AtomicMeasure& mu,
                             const WhitneyOptions& opt = {}) {
    WhitneyResult res;
    res.rho = opt.rho;
    if (omega.boxes.empty() || omega.empty()) return res;
    const int n = omega.dim();
    if (mu.size() > 0 && mu.dim() != n) throw config_error("whitney: dimension mismatch");

    Point lo = omega.boxes.front().first, hi = omega.boxes.front().second;
    for (const auto& [blo, bhi] : omega.boxes)
        for (int i = 0; i < n; ++i) {
            lo[i] = std::min(lo[i], blo[i]);
            hi[i] = std::max(hi[i], bhi[i]);
        }
    for (std::size_t a = 0; a < mu.size(); ++a)
        for (int i = 0; i < n; ++i) {
            lo[i] = std::min(lo[i], mu.position(a)[i]);
            hi[i] = std::max(hi[i], mu.position(a)[i]);
        }
    DyadicFrame frame = make_frame(lo, hi, 4.0);
    res.frame = frame.grid;
    if (omega.covers_cube(frame.realized()))
        throw config_error("whitney: omega must have nonempty complement");

    // Background resolution; atom-holding branches descend further, to the
    // scale where a cube around the atom has 10Q inside omega.
    const int geo_floor = opt.floor_level ? *opt.floor_level
                                          : frame.root.level - (n == 1 ? 14 : 8);
    std::vector<Point> atoms_in;
    int atom_floor = geo_floor;
    for (std::size_t a = 0; a < mu.size(); ++a) {
        PointRef p = mu.position(a);
        if (!omega.contains(p)) continue;
        atoms_in.emplace_back(p.begin(), p.end());
        const double d = omega.dist_to_complement(p, frame.realized().side);
        if (d > 0.0)
            atom_floor = std::min(atom_floor, static_cast<int>(std::floor(std::log2(d / 12.0))));
    }
    atom_floor = std::max(atom_floor, frame.root.level - 48);

    detail::whitney_collect(frame.root, omega, atoms_in, geo_floor, atom_floor, res.cubes);

    for (const WhitneyEntry& e : res.cubes) {
        if (!omega.covers_cube(e.realized.dilated(10.0))) res.property1_ok = false;
        if (omega.covers_cube(e.realized.dilated(opt.rho))) res.property2_ok = false;
    }

    const std::size_t k = res.cubes.size();
    int rho0 = 0;
    for (std::size_t i = 0; i < k; ++i) {
        int overlaps = 0;
        const Cube ci = res.cubes[i].realized.dilated(10.0);
        for (std::size_t j = 0; j < k; ++j) {
            const Cube cj = res.cubes[j].realized.dilated(10.0);
            bool hit = true;
            for (int d = 0; d < n; ++d)
                if (std::abs(ci.center[d] - cj.center[d]) > (ci.side + cj.side) / 2.0) { hit = false; break; }
            if (hit) ++overlaps;
        }
        rho0 = std::max(rho0, overlaps);
    }
    res.rho0 = std::max(rho0, 1);

    // greedy subfamily, heaviest mass first
    const double sb_c = opt.small_boundary_c > 0.0 ? opt.small_boundary_c : 8.0 * n;
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> mass(k);
    for (std::size_t i = 0; i < k; ++i) mass[i] = mu.mass(res.cubes[i].realized);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mass[a] > mass[b]; });

    auto closed_intersects = [n](const Cube& a, const Cube& b) {
        for (int d = 0; d < n; ++d)
            if (std::abs(a.center[d] - b.center[d]) > (a.side + b.side) / 2.0) return false;
        return true;
    };

    for (std::size_t i : order) {
        Cube candidate = res.cubes[i].realized;
        bool ok = false;
        for (double a : {1.0, 1.05, 1.1}) {
            const Cube c = res.cubes[i].realized.dilated(a);
            if (is_doubling_cube(mu, c, 9.0, 2.0 * res.rho0).doubling &&
                has_small_boundary(mu, c, sb_c, opt.xi_grid)) {
                candidate = c;
                ok = true;
                break;
            }
        }
        bool disjoint = true;
        for (const Cube& chosen : res.tilde)
            if (closed_intersects(candidate, chosen)) { disjoint = false; break; }
        if (!disjoint) continue;
        res.subfamily.push_back(i);
        res.tilde.push_back(candidate);
        res.predicates_ok.push_back(ok);
    }

    for (std::size_t a = 0; a < mu.size(); ++a) {
        PointRef p = mu.position(a);
        if (omega.contains(p)) res.omega_mass += mu.weight(a);
        for (const Cube& c : res.tilde)
            if (c.contains(p)) { res.tilde_mass += mu.weight(a); break; }
    }
    return res;
}

struct CZOptions {
    std::vector<double> eta_grid = {2.5, 3.0, 4.0, 6.0, 8.0, 16.0};
    double m = 1.0;          // power-bound exponent used by the (6, 6^(m+1)) doubling scan
};

struct CZCube {
    DyadicCube cube;
    Cube realized;
    Cube companion;          // R_i: concentric 6^k dilation, (6, 6^(m+1))-doubling
    int companion_power = 1; // the k in 6^k
    double phi_constant = 0.0;
    double nu_variation = 0.0;   // |nu|(Q_i)
    SignedMeasure beta;          // w_i nu - phi_i mu
    SignedMeasure w_nu;          // w_i nu
    SignedMeasure phi_mu;        // phi_i mu
};

struct CZResult {
    std::shared_ptr<const ShiftSequence> frame;
    double xi = 0.0;
    std::vector<CZCube> cubes;
    SampledFunction good_part;
    bool cz1_ok = true;
    bool cz2_ok = true;
    bool cz3_ok = true;
    double cz5_constant = 0.0;   // max_x sum_i |phi_i(x)| / xi, over mu atoms
    double cz6_constant = 0.0;   // max_i mu(R_i) |c_i| / |nu|(Q_i)
};

namespace detail {

inline void cz_select(const DyadicCube& c, const SignedMeasure& nu, const AtomicMeasure& mu,
                      double threshold, std::vector<DyadicCube>& out) {
    const Cube r = c.realize();
    const double lhs = nu.variation(r);
    if (lhs == 0.0) return;
    if (lhs > threshold * mu.mass(r.dilated(2.0))) {
        out.push_back(c);
        return;
    }
    // stop once the doubled cube isolates a single position: the selection
    // test cannot change below that scale
    const Cube r2 = r.dilated(2.0);
    PointRef seen{};
    bool isolated = true;
    int found = 0;
    auto scan = [&](auto const& meas) {
        for (std::size_t i = 0; i < meas.size(); ++i) {
            if (!r2.contains(meas.position(i))) continue;
            if (found == 0) { seen = meas.position(i); found = 1; }
            else if (!std::equal(seen.begin(), seen.end(), meas.position(i).begin())) isolated = false;
        }
    };
    scan(nu);
    scan(mu);
    if (isolated) return;
    for (const DyadicCube& child : c.children()) cz_select(child, nu, mu, threshold, out);
}

} // namespace detail

// Calderon-Zygmund decomposition of nu at level xi against mu: maximal dyadic
// cubes where the nu-density against mu(2 .) exceeds xi/2^(n+1), doubling
// companions R_i, and the splitting nu = g mu + sum_i beta_i with each beta_i
// of zero total mass.
inline CZResult cz_decompose(const SignedMeasure& nu, const AtomicMeasure& mu, double xi,
                             const CZOptions& opt = {}) {
    const int n = mu.dim();
    if (nu.dim() != n) throw config_error("cz: dimension mismatch");
    if (mu.total_mass() <= 0.0) throw config_error("cz: mu must have positive mass");
    const double threshold = xi / std::ldexp(1.0, n + 1);
    if (!(xi > std::ldexp(1.0, n + 1) * nu.total_variation() / mu.total_mass()))
        throw config_error("cz: xi must exceed 2^(n+1) ||nu|| / ||mu||");

    auto [mlo, mhi] = mu.bounding_box();
    auto [nlo, nhi] = nu.bounding_box();
    for (int i = 0; i < n; ++i) {
        mlo[i] = std::min(mlo[i], nlo[i]);
        mhi[i] = std::max(mhi[i], nhi[i]);
    }
    DyadicFrame frame = make_frame(mlo, mhi, 4.0);

    CZResult res;
    res.frame = frame.grid;
    res.xi = xi;

    std::vector<DyadicCube> selected;
    detail::cz_select(frame.root, nu, mu, threshold, selected);

    // every nu-atom not co-located with a mu-atom must end up in some cube
    for (std::size_t i = 0; i < nu.size(); ++i) {
        PointRef p = nu.position(i);
        bool has_mu = false;
        for (std::size_t j = 0; j < mu.size(); ++j)
            if (std::equal(p.begin(), p.end(), mu.position(j).begin())) { has_mu = true; break; }
        if (has_mu) continue;
        bool covered = false;
        for (const DyadicCube& q : selected)
            if (q.realize().contains(p)) { covered = true; break; }
        if (!covered) throw check_failure("cz: nu atom without mu mass escaped selection");
    }

    // w_i(p) = 1_{Q_i}(p) / #{k : p in Q_k}
    std::vector<Cube> realized;
    for (const DyadicCube& q : selected) realized.push_back(q.realize());
    std::vector<int> cover_count(nu.size(), 0);
    for (std::size_t p = 0; p < nu.size(); ++p)
        for (const Cube& r : realized)
            if (r.contains(nu.position(p))) ++cover_count[p];

    const Cube root_cube = frame.realized();
    for (std::size_t qi = 0; qi < selected.size(); ++qi) {
        CZCube entry;
        entry.cube = selected[qi];
        entry.realized = realized[qi];
        entry.nu_variation = nu.variation(realized[qi]);

        // smallest 6^k dilation that is (6, 6^(m+1))-doubling with positive mass
        bool found = false;
        std::ostringstream chain;
        Cube cand = realized[qi];
        for (int k = 1;; ++k) {
            cand = cand.dilated(6.0);
            if (!cube_subset(cand, root_cube)) break;
            const DoublingResult d = is_doubling_cube(mu, cand, 6.0, std::pow(6.0, opt.m + 1.0));
            chain << " 6^" << k << ":ratio=" << (std::isfinite(d.ratio) ? d.ratio : -1.0);
            if (d.doubling && mu.mass(cand) > 0.0) {
                entry.companion = cand;
                entry.companion_power = k;
                found = true;
                break;
            }
        }
        if (!found)
            throw check_failure("cz: doubling companion not found within working box; scanned" +
                                chain.str());

        double wnu_q = 0.0;
        std::vector<Point> wpos;
        std::vector<double> wval;
        for (std::size_t p = 0; p < nu.size(); ++p) {
            if (!realized[qi].contains(nu.position(p))) continue;
            const double w = nu.weight(p) / cover_count[p];
            wnu_q += w;
            wpos.emplace_back(nu.position(p).begin(), nu.position(p).end());
            wval.push_back(w);
        }
        const double mass_r = mu.mass(entry.companion);
        entry.phi_constant = wnu_q / mass_r;

        std::vector<Point> ppos;
        std::vector<double> pval;
        for (std::size_t a = 0; a < mu.size(); ++a) {
            if (!entry.companion.contains(mu.position(a))) continue;
            ppos.emplace_back(mu.position(a).begin(), mu.position(a).end());
            pval.push_back(entry.phi_constant * mu.weight(a));
        }
        entry.w_nu = SignedMeasure(n, wpos, wval);
        entry.phi_mu = SignedMeasure(n, ppos, pval);
        std::vector<Point> bpos = wpos;
        std::vector<double> bval = wval;
        for (std::size_t a = 0; a < ppos.size(); ++a) {
            bpos.push_back(ppos[a]);
            bval.push_back(-pval[a]);
        }
        entry.beta = SignedMeasure(n, bpos, bval);
        res.cubes.push_back(std::move(entry));
    }

    // good part g: nu/mu density off the cubes plus the companion constants
    std::vector<double> g(mu.size(), 0.0);
    for (std::size_t a = 0; a < mu.size(); ++a) {
        PointRef p = mu.position(a);
        bool in_cube = false;
        for (const Cube& r : realized)
            if (r.contains(p)) { in_cube = true; break; }
        if (!in_cube) {
            for (std::size_t i = 0; i < nu.size(); ++i)
                if (std::equal(p.begin(), p.end(), nu.position(i).begin())) {
                    g[a] = nu.weight(i) / mu.weight(a);
                    break;
                }
        }
        for (const CZCube& c : res.cubes)
            if (c.companion.contains(p)) g[a] += c.phi_constant;
    }
    res.good_part = SampledFunction(mu, std::move(g));

    // independent verification pass
    for (const CZCube& c : res.cubes) {
        if (!(nu.variation(c.realized) > threshold * mu.mass(c.realized.dilated(2.0))))
            res.cz1_ok = false;
        std::vector<double> etas = opt.eta_grid;
        const double eta_box = root_cube.side / c.realized.side;
        if (eta_box > 2.0) etas.push_back(eta_box);
        for (double eta : etas) {
            if (eta <= 2.0) continue;
            if (nu.variation(c.realized.dilated(eta)) >
                threshold * mu.mass(c.realized.dilated(2.0 * eta)))
                res.cz2_ok = false;
        }
        const double c6 = mu.mass(c.companion) * std::abs(c.phi_constant) /
                          (c.nu_variation > 0.0 ? c.nu_variation : 1.0);
        res.cz6_constant = std::max(res.cz6_constant, c6);
    }
    for (std::size_t a = 0; a < mu.size(); ++a) {
        PointRef p = mu.position(a);
        bool in_cube = false;
        for (const Cube& r : realized)
            if (r.contains(p)) { in_cube = true; break; }
        if (!in_cube) {
            double nu_at = 0.0;
            for (std::size_t i = 0; i < nu.size(); ++i)
                if (std::equal(p.begin(), p.end(), nu.position(i).begin())) nu_at = nu.weight(i);
            if (std::abs(nu_at / mu.weight(a)) > xi) res.cz3_ok = false;
        }
        double stack = 0.0;
        for (const CZCube& c : res.cubes)
            if (c.companion.contains(p)) stack += std::abs(c.phi_constant);
        res.cz5_constant = std::max(res.cz5_constant, stack / xi);
    }
    return res;
}

} // namespace gstar
