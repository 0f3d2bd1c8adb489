#pragma once

#include <vector>

#include "gstar/kernel.hpp"
#include "gstar/quadrature.hpp"

namespace gstar {

// Parameters of the off-cone weight (t/(t+|x-y|))^(m lambda).
struct LambdaParams {
    double lambda = 5.0;
    double m = 1.0;

    LambdaParams() = default;
    LambdaParams(double l, double m_) : lambda(l), m(m_) {}
    LambdaParams(double l, const KernelSpec& spec) : lambda(l), m(spec.m) {}
};

inline bool hypothesis_ok(const KernelSpec& spec, const LambdaParams& lp) {
    return lp.lambda > 2.0 * spec.kappa && spec.alpha > 0.0 &&
           spec.alpha <= spec.m * (lp.lambda - 2.0 * spec.kappa);
}

inline double offcone_weight(const LambdaParams& lp, double t, double d) {
    return std::pow(t / (t + d), lp.m * lp.lambda);
}

namespace detail {

// One slot sum S = sum_z k_t(|y-z|) c(z), optionally skipping atoms whose
// kernel factor has fallen below prune_tol times the largest factor seen.
template <class Coef>
double slot_sum(const KernelSpec& spec, PointRef y, double t, std::size_t count, Coef&& coef,
                double prune_tol) {
    double s = 0.0, max_factor = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const auto [pos, c] = coef(i);
        if (c == 0.0) continue;
        const double k = kernel_factor(spec, dist(y, pos), t);
        if (k > max_factor) max_factor = k;
        else if (prune_tol > 0.0 && k < prune_tol * max_factor) continue;
        s += k * c;
    }
    return s;
}

} // namespace detail

// Theta_t(f_1..f_kappa)(y): the kappa-linear smoothing form. Product kernels
// factor slot by slot, so the kappa-fold sum collapses to kappa single sums.
inline double theta(const KernelSpec& spec, const AtomicMeasure& mu,
                    const std::vector<SampledFunction>& fs, PointRef y, double t,
                    double prune_tol = 0.0) {
    if (!(t > 0.0)) throw config_error("theta: t must be positive");
    if (static_cast<int>(fs.size()) != spec.kappa) throw config_error("theta: expected kappa functions");
    double v = spec.amplitude;
    for (const SampledFunction& f : fs) {
        v *= detail::slot_sum(
            spec, y, t, mu.size(),
            [&](std::size_t i) { return std::pair<PointRef, double>(mu.position(i), f.values[i] * mu.weight(i)); },
            prune_tol);
        if (v == 0.0) return 0.0;
    }
    return v;
}

// Unpruned kappa-fold nested sum; the cross-check route for theta.
inline double theta_naive(const KernelSpec& spec, const AtomicMeasure& mu,
                          const std::vector<SampledFunction>& fs, PointRef y, double t) {
    if (!(t > 0.0)) throw config_error("theta_naive: t must be positive");
    std::vector<std::size_t> idx(spec.kappa, 0);
    double total = 0.0;
    if (mu.size() == 0) return 0.0;
    while (true) {
        double term = spec.amplitude;
        for (int s = 0; s < spec.kappa; ++s) {
            const std::size_t i = idx[s];
            term *= kernel_factor(spec, dist(y, mu.position(i)), t) * fs[s].values[i] * mu.weight(i);
        }
        total += term;
        int s = spec.kappa - 1;
        while (s >= 0 && ++idx[s] == mu.size()) idx[s--] = 0;
        if (s < 0) break;
    }
    return total;
}

// Theta_t(nu_1..nu_kappa)(y) for signed measures.
inline double theta_measures(const KernelSpec& spec, const std::vector<SignedMeasure>& nus,
                             PointRef y, double t, double prune_tol = 0.0) {
    if (!(t > 0.0)) throw config_error("theta_measures: t must be positive");
    if (static_cast<int>(nus.size()) != spec.kappa) throw config_error("theta_measures: expected kappa measures");
    double v = spec.amplitude;
    for (const SignedMeasure& nu : nus) {
        v *= detail::slot_sum(
            spec, y, t, nu.size(),
            [&](std::size_t i) { return std::pair<PointRef, double>(nu.position(i), nu.weight(i)); },
            prune_tol);
        if (v == 0.0) return 0.0;
    }
    return v;
}

inline double theta_measures_naive(const KernelSpec& spec, const std::vector<SignedMeasure>& nus,
                                   PointRef y, double t) {
    if (!(t > 0.0)) throw config_error("theta_measures_naive: t must be positive");
    for (const SignedMeasure& nu : nus)
        if (nu.size() == 0) return 0.0;
    std::vector<std::size_t> idx(spec.kappa, 0);
    double total = 0.0;
    while (true) {
        double term = spec.amplitude;
        for (int s = 0; s < spec.kappa; ++s)
            term *= kernel_factor(spec, dist(y, nus[s].position(idx[s])), t) * nus[s].weight(idx[s]);
        total += term;
        int s = spec.kappa - 1;
        while (s >= 0 && ++idx[s] == nus[s].size()) idx[s--] = 0;
        if (s < 0) break;
    }
    return total;
}

// u_t: the scale-t slice of the square function,
// ( int (t/(t+|x-y|))^(m l) |Theta_t(y)|^2 dmu(y)/t^m )^(1/2).
inline double slice_norm(const KernelSpec& spec, const LambdaParams& lp, const AtomicMeasure& mu,
                         const std::vector<SampledFunction>& fs, PointRef x, double t,
                         double prune_tol = 0.0) {
    const double tm = std::pow(t, spec.m);
    double s = 0.0;
    for (std::size_t yi = 0; yi < mu.size(); ++yi) {
        const double th = theta(spec, mu, fs, mu.position(yi), t, prune_tol);
        s += offcone_weight(lp, t, dist(x, mu.position(yi))) * th * th * mu.weight(yi) / tm;
    }
    return std::sqrt(s);
}

inline double slice_norm_naive(const KernelSpec& spec, const LambdaParams& lp, const AtomicMeasure& mu,
                               const std::vector<SampledFunction>& fs, PointRef x, double t) {
    const double tm = std::pow(t, spec.m);
    double s = 0.0;
    for (std::size_t yi = 0; yi < mu.size(); ++yi) {
        const double th = theta_naive(spec, mu, fs, mu.position(yi), t);
        s += offcone_weight(lp, t, dist(x, mu.position(yi))) * th * th * mu.weight(yi) / tm;
    }
    return std::sqrt(s);
}

// L_t: the single-scale majorant  int t^(a/4)/(t+|x-z|)^(m+a/4) |f| dmu.
inline double poisson_potential(const KernelSpec& spec, const AtomicMeasure& mu,
                                const SampledFunction& f, PointRef x, double t) {
    const double e = spec.alpha / 4.0;
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i)
        s += std::pow(t, e) / std::pow(t + dist(x, mu.position(i)), spec.m + e) *
             std::abs(f.values[i]) * mu.weight(i);
    return s;
}

// Precomputes Theta_t(y)^2 on the (node, atom) lattice once; per-point
// evaluations of g*, its truncations and the Lusin integral are then a single
// sweep over that table. Sums run in a fixed order, so results do not depend
// on how callers parallelise over evaluation points.
class SquareFunctionEvaluator {
public:
    SquareFunctionEvaluator(const KernelSpec& spec, const LambdaParams& lp, const AtomicMeasure& mu,
                            const std::vector<SampledFunction>& fs, const QuadratureSpec& quad,
                            bool naive = false)
        : spec_(spec), lp_(lp), mu_(&mu), grid_(make_grid(quad)) {
        build([&](PointRef y, double t) {
            return naive ? theta_naive(spec_, mu, fs, y, t) : theta(spec_, mu, fs, y, t, quad.prune_tol);
        });
    }

    SquareFunctionEvaluator(const KernelSpec& spec, const LambdaParams& lp, const AtomicMeasure& mu,
                            const std::vector<SignedMeasure>& nus, const QuadratureSpec& quad,
                            bool naive = false)
        : spec_(spec), lp_(lp), mu_(&mu), grid_(make_grid(quad)) {
        build([&](PointRef y, double t) {
            return naive ? theta_measures_naive(spec_, nus, y, t)
                         : theta_measures(spec_, nus, y, t, quad.prune_tol);
        });
    }

    const TimeGrid& grid() const { return grid_; }

    // Sum over mu-atoms at node j, against the off-cone weight (cone=false)
    // or restricted to the cone |x-y| <= t (cone=true, weight 1).
    double node_term(PointRef x, std::size_t j, bool cone) const {
        const double t = grid_.nodes[j];
        const double tm = std::pow(t, spec_.m);
        const double* row = theta_sq_.data() + j * mu_->size();
        double s = 0.0;
        for (std::size_t yi = 0; yi < mu_->size(); ++yi) {
            if (row[yi] == 0.0) continue;
            const double d = dist(x, mu_->position(yi));
            if (cone) {
                if (d <= t) s += row[yi] * mu_->weight(yi) / tm;
            } else {
                s += offcone_weight(lp_, t, d) * row[yi] * mu_->weight(yi) / tm;
            }
        }
        return s;
    }

    double slice(PointRef x, std::size_t j) const { return std::sqrt(node_term(x, j, false)); }

    // Nodes are log-midpoints of their cells, so a window [t_lo, t_hi) aligned
    // with cell edges selects exactly the cells it covers.
    double accumulate(PointRef x, double t_lo, double t_hi, bool cone) const {
        double s = 0.0;
        for (std::size_t j = 0; j < grid_.nodes.size(); ++j) {
            const double t = grid_.nodes[j];
            if (t < t_lo || t >= t_hi) continue;
            s += node_term(x, j, cone) * grid_.dlog;
        }
        return std::sqrt(s);
    }

    double g_star(PointRef x) const { return accumulate(x, 0.0, INFINITY, false); }
    double g_star_truncated(PointRef x, double t0) const { return accumulate(x, t0, INFINITY, false); }
    double g_star_local(PointRef x, double cube_side) const { return accumulate(x, 0.0, cube_side, false); }
    double lusin(PointRef x) const { return accumulate(x, 0.0, INFINITY, true); }

private:
    template <class ThetaFn>
    void build(ThetaFn&& th) {
        theta_sq_.resize(grid_.nodes.size() * mu_->size());
        for (std::size_t j = 0; j < grid_.nodes.size(); ++j)
            for (std::size_t yi = 0; yi < mu_->size(); ++yi) {
                const double v = th(mu_->position(yi), grid_.nodes[j]);
                theta_sq_[j * mu_->size() + yi] = v * v;
            }
    }

    KernelSpec spec_;
    LambdaParams lp_;
    const AtomicMeasure* mu_;
    TimeGrid grid_;
    std::vector<double> theta_sq_;
};

inline double g_star(const KernelSpec& spec, const LambdaParams& lp, const AtomicMeasure& mu,
                     const std::vector<SampledFunction>& fs, PointRef x, const QuadratureSpec& quad) {
    return SquareFunctionEvaluator(spec, lp, mu, fs, quad).g_star(x);
}

inline double g_star_naive(const KernelSpec& spec, const LambdaParams& lp, const AtomicMeasure& mu,
                           const std::vector<SampledFunction>& fs, PointRef x,
                           const QuadratureSpec& quad) {
    const TimeGrid grid = make_grid(quad);
    double s = 0.0;
    for (double t : grid.nodes) {
        const double u = slice_norm_naive(spec, lp, mu, fs, x, t);
        s += u * u * grid.dlog;
    }
    return std::sqrt(s);
}

inline double g_star_truncated(const KernelSpec& spec, const LambdaParams& lp, const AtomicMeasure& mu,
                               const std::vector<SampledFunction>& fs, PointRef x, double t0,
                               const QuadratureSpec& quad) {
    if (t0 < quad.t_min || t0 > quad.t_max)
        throw config_error("g_star_truncated: t0 outside the quadrature window");
    return SquareFunctionEvaluator(spec, lp, mu, fs, quad).g_star_truncated(x, t0);
}

inline double g_star_local(const KernelSpec& spec, const LambdaParams& lp, const AtomicMeasure& mu,
                           const std::vector<SampledFunction>& fs, PointRef x, const Cube& q,
                           const QuadratureSpec& quad) {
    return SquareFunctionEvaluator(spec, lp, mu, fs, quad).g_star_local(x, q.side);
}

inline double g_star_measures(const KernelSpec& spec, const LambdaParams& lp, const AtomicMeasure& mu,
                              const std::vector<SignedMeasure>& nus, PointRef x,
                              const QuadratureSpec& quad) {
    return SquareFunctionEvaluator(spec, lp, mu, nus, quad).g_star(x);
}

// Lusin area integral over the cone |x-y| <= t, normalised by t^m.
inline double lusin_area(const KernelSpec& spec, const AtomicMeasure& mu,
                         const std::vector<SampledFunction>& fs, PointRef x,
                         const QuadratureSpec& quad) {
    return SquareFunctionEvaluator(spec, LambdaParams(2.0 * spec.kappa + 1.0, spec), mu, fs, quad)
        .lusin(x);
}

inline double difference_weight(const LambdaParams& lp, double t, PointRef y, PointRef x, PointRef xp) {
    return std::pow(t / (t + dist(x, y)), lp.m * lp.lambda / 2.0) -
           std::pow(t / (t + dist(xp, y)), lp.m * lp.lambda / 2.0);
}

// Split pattern for the tail operator: slot i keeps f_i 1_{2Q} (Near) or
// f_i 1_{(2Q)^c} (Far). At least one Far slot is required.
enum class TailSlot { Near, Far };

inline std::vector<SampledFunction> split_functions(const std::vector<SampledFunction>& fs,
                                                    const std::vector<TailSlot>& pattern, const Cube& q) {
    if (pattern.size() != fs.size()) throw config_error("tail split pattern length mismatch");
    bool any_far = false;
    for (TailSlot s : pattern) any_far |= (s == TailSlot::Far);
    if (!any_far) throw config_error("tail split must have at least one far slot");
    const Cube q2 = q.dilated(2.0);
    std::vector<SampledFunction> out;
    for (std::size_t i = 0; i < fs.size(); ++i)
        out.push_back(fs[i].restricted(q2, pattern[i] == TailSlot::Near));
    return out;
}

// T(f^r)(x): tail square function with the difference weight V_{t,y}(x,x')^2,
// integrated over t >= c0 l(Q).
inline double tail_norm(const KernelSpec& spec, const LambdaParams& lp, const AtomicMeasure& mu,
                        const std::vector<SampledFunction>& fs, const std::vector<TailSlot>& pattern,
                        PointRef x, PointRef xp, const Cube& q, double c0, const QuadratureSpec& quad,
                        bool naive = false) {
    if (!q.contains(x) || !q.contains(xp)) throw config_error("tail_norm: x and x' must lie in Q");
    const std::vector<SampledFunction> split = split_functions(fs, pattern, q);
    const TimeGrid grid = make_grid(quad);
    const double t_lo = c0 * q.side;
    double total = 0.0;
    for (double t : grid.nodes) {
        if (t < t_lo) continue;
        const double tm = std::pow(t, spec.m);
        double s = 0.0;
        for (std::size_t yi = 0; yi < mu.size(); ++yi) {
            PointRef y = mu.position(yi);
            const double th = naive ? theta_naive(spec, mu, split, y, t)
                                    : theta(spec, mu, split, y, t, quad.prune_tol);
            const double v = difference_weight(lp, t, y, x, xp);
            s += v * v * th * th * mu.weight(yi) / tm;
        }
        total += s * grid.dlog;
    }
    return std::sqrt(total);
}

} // namespace gstar
