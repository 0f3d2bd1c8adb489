#pragma once

#include <string>
#include <vector>

#include "gstar/geometry.hpp"
#include "gstar/rng.hpp"

namespace gstar {

enum class KernelFamily { ProductPoisson, ProductGaussian };

inline std::string family_name(KernelFamily f) {
    return f == KernelFamily::ProductPoisson ? "product_poisson" : "product_gaussian";
}

// Multilinear product kernel s_t(x, y_1..y_kappa) = amplitude * prod_i k_t(|x - y_i|).
// The per-slot factor k_t is chosen so the size condition holds with constant
// exactly `amplitude` (Poisson family saturates it; the Gaussian family sits
// strictly below it).
struct KernelSpec {
    double m = 1.0;        // power-bound exponent of the ambient measure
    double alpha = 1.0;    // Hoelder/decay exponent
    int kappa = 2;         // linearity degree, >= 2
    KernelFamily family = KernelFamily::ProductPoisson;
    double amplitude = 1.0;

    void validate() const {
        if (!(m > 0.0)) throw config_error("kernel: m must be positive");
        if (!(alpha > 0.0)) throw config_error("kernel: alpha must be positive");
        if (kappa < 2) throw config_error("kernel: kappa must be >= 2");
        if (!(amplitude > 0.0)) throw config_error("kernel: amplitude must be positive");
    }
};

// Normalisation making the Gaussian factor sit under the rational size bound:
// c * exp(-u^2) <= (1+u)^-(m+a) for all u >= 0, with c as large as possible.
inline double gaussian_norm_constant(double m, double alpha) {
    const double s = m + alpha;
    const double u = (-1.0 + std::sqrt(1.0 + 2.0 * s)) / 2.0;  // stationary point of s*log(1+u) - u^2
    return std::exp(u * u - s * std::log1p(u));
}

// One slot of the product kernel (amplitude excluded).
inline double kernel_factor(const KernelSpec& spec, double d, double t) {
    switch (spec.family) {
        case KernelFamily::ProductPoisson:
            return std::pow(t, spec.alpha) / std::pow(t + d, spec.m + spec.alpha);
        case KernelFamily::ProductGaussian: {
            const double u = d / t;
            return gaussian_norm_constant(spec.m, spec.alpha) * std::exp(-u * u) /
                   std::pow(t, spec.m);
        }
    }
    return 0.0;
}

inline double eval_kernel(const KernelSpec& spec, PointRef x, const std::vector<Point>& ys, double t) {
    if (!(t > 0.0)) throw config_error("kernel: t must be positive");
    if (static_cast<int>(ys.size()) != spec.kappa) throw config_error("kernel: expected kappa slot points");
    double v = spec.amplitude;
    for (const Point& y : ys) v *= kernel_factor(spec, dist(x, y), t);
    return v;
}

// The reference size bound t^(kappa a) / prod (t + |x-y_i|)^(m+a), assembled
// slot by slot so the Poisson family saturates it with identical rounding.
inline double size_bound(const KernelSpec& spec, PointRef x, const std::vector<Point>& ys, double t) {
    double v = 1.0;
    for (const Point& y : ys)
        v *= std::pow(t, spec.alpha) / std::pow(t + dist(x, y), spec.m + spec.alpha);
    return v;
}

struct ConditionWitness {
    Point x;
    std::vector<Point> ys;
    double t = 1.0;
    int slot = -1;   // -1: x-perturbation, otherwise the perturbed y slot
    Point perturbed;
};

struct ConditionReport {
    double max_ratio = 0.0;
    std::size_t samples_used = 0;
    ConditionWitness witness;
    std::vector<double> slot_max;  // Hoelder check: [x, y_1, ..., y_kappa] maxima
};

namespace detail {

inline Point random_point(Rng& rng, int n, double scale) {
    Point p(n);
    for (int i = 0; i < n; ++i) p[i] = scale * rng.normal();
    return p;
}

} // namespace detail

// max over samples of |s_t| * prod(t+|x-y_i|)^(m+a) / t^(kappa a). The ratio
// is assembled slot by slot so a family that saturates the bound (Poisson)
// reports its amplitude without rounding noise.
inline ConditionReport check_size(const KernelSpec& spec, int n, int sample_count, std::uint64_t seed) {
    spec.validate();
    if (sample_count < 1) throw config_error("check_size: sample_count must be >= 1");
    ConditionReport rep;
    Rng rng = Rng::stream(seed, 0x51ULL);
    for (int k = 0; k < sample_count; ++k) {
        const double t = rng.log_uniform(1e-3, 1e3);
        Point x = detail::random_point(rng, n, 4.0 * t);
        std::vector<Point> ys;
        for (int i = 0; i < spec.kappa; ++i) ys.push_back(detail::random_point(rng, n, 4.0 * t));
        double ratio = spec.amplitude;
        for (const Point& y : ys) {
            const double d = dist(x, y);
            ratio *= std::abs(kernel_factor(spec, d, t)) /
                     (std::pow(t, spec.alpha) / std::pow(t + d, spec.m + spec.alpha));
        }
        ++rep.samples_used;
        if (ratio > rep.max_ratio) {
            rep.max_ratio = ratio;
            rep.witness = {x, ys, t, -1, {}};
        }
    }
    return rep;
}

// Hoelder ratios for the x slot and each y slot; perturbation sizes are drawn
// log-uniformly in [t*2^-20, t/2) to cover both the smooth limit and the
// admissibility boundary.
inline ConditionReport check_holder(const KernelSpec& spec, int n, int sample_count, std::uint64_t seed) {
    spec.validate();
    if (sample_count < 1) throw config_error("check_holder: sample_count must be >= 1");
    ConditionReport rep;
    rep.slot_max.assign(spec.kappa + 1, 0.0);
    Rng rng = Rng::stream(seed, 0x601ULL);
    for (int k = 0; k < sample_count; ++k) {
        const double t = rng.log_uniform(1e-3, 1e3);
        Point x = detail::random_point(rng, n, 4.0 * t);
        std::vector<Point> ys;
        for (int i = 0; i < spec.kappa; ++i) ys.push_back(detail::random_point(rng, n, 4.0 * t));
        const double denom_base = size_bound(spec, x, ys, t) / std::pow(t, spec.kappa * spec.alpha);
        const double eps = rng.log_uniform(t * 0x1.0p-20, t * 0.499);
        Point dir = detail::random_point(rng, n, 1.0);
        double norm = std::sqrt(dist_sq(dir, Point(n, 0.0)));
        if (norm == 0.0) { dir[0] = 1.0; norm = 1.0; }
        for (double& c : dir) c *= eps / norm;

        const int slot = static_cast<int>(rng.integer(-1, spec.kappa - 1));
        double diff;
        Point moved;
        if (slot < 0) {
            moved = x;
            for (int i = 0; i < n; ++i) moved[i] += dir[i];
            diff = std::abs(eval_kernel(spec, x, ys, t) - eval_kernel(spec, moved, ys, t));
        } else {
            std::vector<Point> ys2 = ys;
            moved = ys2[slot];
            for (int i = 0; i < n; ++i) moved[i] += dir[i];
            ys2[slot] = moved;
            diff = std::abs(eval_kernel(spec, x, ys, t) - eval_kernel(spec, x, ys2, t));
        }
        const double ratio = diff / (std::pow(t, (spec.kappa - 1) * spec.alpha) *
                                     std::pow(eps, spec.alpha) * denom_base);
        ++rep.samples_used;
        rep.slot_max[slot + 1] = std::max(rep.slot_max[slot + 1], ratio);
        if (ratio > rep.max_ratio) {
            rep.max_ratio = ratio;
            rep.witness = {x, ys, t, slot, moved};
        }
    }
    return rep;
}

} // namespace gstar
