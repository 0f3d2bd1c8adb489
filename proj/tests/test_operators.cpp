#include <catch2/catch_amalgamated.hpp>

#include "gstar/operators.hpp"
#include "gstar/verify.hpp"

using namespace gstar;

namespace {

struct Instance {
    AtomicMeasure mu;
    std::vector<SampledFunction> fs;
};

Instance random_instance(Rng& rng, int n, int atoms, int kappa, double box = 4.0) {
    Instance inst{synth::random_measure(rng, n, atoms, box), {}};
    for (int i = 0; i < kappa; ++i)
        inst.fs.push_back(synth::random_function(rng, inst.mu, -1.0, 1.0));
    return inst;
}

} // namespace

TEST_CASE("theta basics", "[operators]") {
    KernelSpec spec;
    SECTION("zero slot annihilates") {
        Rng rng(1);
        Instance inst = random_instance(rng, 1, 12, 2);
        inst.fs[1] = SampledFunction::constant(inst.mu, 0.0);
        CHECK(theta(spec, inst.mu, inst.fs, Point{0.3}, 0.7) == 0.0);
    }
    SECTION("single atom closed form") {
        AtomicMeasure mu(1, {{0.5}}, {2.0});
        SampledFunction f1(mu, {3.0}), f2(mu, {-1.5});
        const Point y{0.1};
        const double t = 0.8;
        const double expected = eval_kernel(spec, y, {{0.5}, {0.5}}, t) * 3.0 * (-1.5) * 4.0;
        CHECK(theta(spec, mu, {f1, f2}, y, t) == Catch::Approx(expected).epsilon(1e-14));
    }
    SECTION("matches the nested-loop oracle") {
        Rng rng(2);
        for (int trial = 0; trial < 25; ++trial) {
            Instance inst = random_instance(rng, trial % 2 + 1, 2 + trial, 2);
            Point y(inst.mu.dim());
            for (double& c : y) c = rng.uniform(-1.0, 5.0);
            const double t = rng.log_uniform(0.05, 10.0);
            const double fast = theta(spec, inst.mu, inst.fs, y, t);
            const double naive = theta_naive(spec, inst.mu, inst.fs, y, t);
            CHECK(fast == Catch::Approx(naive).epsilon(1e-12).margin(1e-15));
        }
    }
    SECTION("kappa = 3 product kernels") {
        KernelSpec spec3;
        spec3.kappa = 3;
        Rng rng(3);
        Instance inst = random_instance(rng, 1, 6, 3);
        const Point y{1.0};
        CHECK(theta(spec3, inst.mu, inst.fs, y, 0.5) ==
              Catch::Approx(theta_naive(spec3, inst.mu, inst.fs, y, 0.5)).epsilon(1e-12));
    }
    SECTION("linearity in each slot") {
        Rng rng(4);
        Instance inst = random_instance(rng, 1, 10, 2);
        SampledFunction g = synth::random_function(rng, inst.mu, -1.0, 1.0);
        std::vector<double> mix(inst.mu.size());
        for (std::size_t i = 0; i < mix.size(); ++i)
            mix[i] = 2.0 * inst.fs[0].values[i] - 3.0 * g.values[i];
        const Point y{0.7};
        const double t = 0.4;
        const double lhs = theta(spec, inst.mu, {SampledFunction(inst.mu, mix), inst.fs[1]}, y, t);
        const double rhs = 2.0 * theta(spec, inst.mu, {inst.fs[0], inst.fs[1]}, y, t) -
                           3.0 * theta(spec, inst.mu, {g, inst.fs[1]}, y, t);
        CHECK(lhs == Catch::Approx(rhs).epsilon(1e-13));
    }
}

TEST_CASE("theta over signed measures", "[operators]") {
    KernelSpec spec;
    SECTION("consistent with density functions") {
        Rng rng(5);
        Instance inst = random_instance(rng, 1, 15, 2);
        const SignedMeasure nu1 = density_measure(inst.mu, inst.fs[0].values);
        const SignedMeasure nu2 = density_measure(inst.mu, inst.fs[1].values);
        const Point y{0.2};
        CHECK(theta_measures(spec, {nu1, nu2}, y, 0.9) ==
              Catch::Approx(theta(spec, inst.mu, inst.fs, y, 0.9)).epsilon(1e-13));
    }
    SECTION("cancelling atoms merge to zero") {
        const SignedMeasure beta(1, {{1.0}, {1.0}}, {2.5, -2.5});
        const SignedMeasure other(1, {{0.0}}, {1.0});
        CHECK(theta_measures(spec, {beta, other}, Point{0.0}, 1.0) == 0.0);
    }
    SECTION("matches the nested oracle") {
        Rng rng(6);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<Point> pos;
            std::vector<double> w;
            for (int i = 0; i < 8 + trial; ++i) {
                pos.push_back({rng.uniform(0.0, 4.0)});
                w.push_back(rng.uniform(-1.0, 1.0));
            }
            const SignedMeasure nu(1, pos, w);
            const Point y{rng.uniform(0.0, 4.0)};
            const double t = rng.log_uniform(0.1, 5.0);
            CHECK(theta_measures(spec, {nu, nu}, y, t) ==
                  Catch::Approx(theta_measures_naive(spec, {nu, nu}, y, t))
                      .epsilon(1e-12)
                      .margin(1e-15));
        }
    }
}

TEST_CASE("single-scale slice and majorant", "[operators]") {
    KernelSpec spec;
    const LambdaParams lp(5.0, spec);
    SECTION("zero input") {
        Rng rng(7);
        Instance inst = random_instance(rng, 1, 9, 2);
        for (auto& f : inst.fs) f = SampledFunction::constant(inst.mu, 0.0);
        CHECK(slice_norm(spec, lp, inst.mu, inst.fs, Point{0.0}, 1.0) == 0.0);
        CHECK(poisson_potential(spec, inst.mu, inst.fs[0], Point{0.0}, 1.0) == 0.0);
    }
    SECTION("single atom closed forms") {
        AtomicMeasure mu(1, {{0.4}}, {2.0});
        SampledFunction f1(mu, {1.5}), f2(mu, {-2.0});
        const Point x{0.0};
        const double t = 0.6;
        const double th = theta(spec, mu, {f1, f2}, mu.position(0), t);
        const double expected =
            std::sqrt(offcone_weight(lp, t, 0.4) * th * th * 2.0 / std::pow(t, spec.m));
        CHECK(slice_norm(spec, lp, mu, {f1, f2}, x, t) == Catch::Approx(expected).epsilon(1e-14));
        // atom at the evaluation point: t^(a/4)/t^(m+a/4) v w = v w / t^m
        const double pot = poisson_potential(spec, mu, f2, Point{0.4}, t);
        CHECK(pot == Catch::Approx(2.0 * 2.0 / std::pow(t, spec.m)).epsilon(1e-14));
    }
    SECTION("slice matches the nested oracle") {
        Rng rng(8);
        for (int trial = 0; trial < 10; ++trial) {
            Instance inst = random_instance(rng, 1, 10 + 3 * trial, 2);
            const Point x{rng.uniform(-1.0, 5.0)};
            const double t = rng.log_uniform(0.05, 8.0);
            CHECK(slice_norm(spec, lp, inst.mu, inst.fs, x, t) ==
                  Catch::Approx(slice_norm_naive(spec, lp, inst.mu, inst.fs, x, t)).epsilon(1e-12));
        }
    }
    SECTION("majorant matches a direct sum") {
        Rng rng(9);
        Instance inst = random_instance(rng, 2, 14, 2);
        const Point x{1.0, 2.0};
        const double t = 0.37;
        double oracle = 0.0;
        for (std::size_t i = 0; i < inst.mu.size(); ++i)
            oracle += std::pow(t, 0.25) /
                      std::pow(t + dist(x, inst.mu.position(i)), spec.m + 0.25) *
                      std::abs(inst.fs[0].values[i]) * inst.mu.weight(i);
        CHECK(poisson_potential(spec, inst.mu, inst.fs[0], x, t) ==
              Catch::Approx(oracle).epsilon(1e-12));
    }
}

TEST_CASE("g_star and its truncations", "[operators]") {
    KernelSpec spec;
    const LambdaParams lp(5.0, spec);
    Rng rng(10);
    Instance inst = random_instance(rng, 1, 20, 2);
    const QuadratureSpec quad = default_quadrature(inst.mu);
    const Point x{1.3};

    SECTION("zero functions") {
        std::vector<SampledFunction> zero(2, SampledFunction::constant(inst.mu, 0.0));
        CHECK(g_star(spec, lp, inst.mu, zero, x, quad) == 0.0);
    }
    SECTION("lambda monotonicity, pointwise") {
        for (int k = 0; k < 8; ++k) {
            const Point p{rng.uniform(-2.0, 6.0)};
            const double g5 = g_star(spec, LambdaParams(5.0, spec), inst.mu, inst.fs, p, quad);
            const double g6 = g_star(spec, LambdaParams(6.0, spec), inst.mu, inst.fs, p, quad);
            CHECK(g5 >= g6);
        }
    }
    SECTION("homogeneity in one slot") {
        std::vector<double> scaled = inst.fs[0].values;
        for (double& v : scaled) v *= -7.0;
        const double lhs =
            g_star(spec, lp, inst.mu, {SampledFunction(inst.mu, scaled), inst.fs[1]}, x, quad);
        CHECK(lhs == Catch::Approx(7.0 * g_star(spec, lp, inst.mu, inst.fs, x, quad)).epsilon(1e-13));
    }
    SECTION("two-atom value against a refined quadrature reference") {
        // The reference keeps t_min (the left endpoint is part of the
        // operator's contract; the atomic small-t integrand does not decay)
        // and refines the node density while extending the tail window.
        AtomicMeasure mu(1, {{0.0}, {1.0}}, {1.0, 0.5});
        std::vector<SampledFunction> fs{SampledFunction(mu, {1.0, -2.0}),
                                        SampledFunction(mu, {0.5, 1.0})};
        const LambdaParams lp6(6.0, spec);
        QuadratureSpec coarse = default_quadrature(mu);
        QuadratureSpec fine = coarse;
        fine.nodes_per_decade = coarse.nodes_per_decade * 8;
        fine.t_max = coarse.t_max * 100.0;
        const double v = g_star(spec, lp6, mu, fs, Point{0.25}, coarse);
        const double ref = g_star(spec, lp6, mu, fs, Point{0.25}, fine);
        CHECK(v == Catch::Approx(ref).epsilon(1e-3));
    }
    SECTION("naive equivalence") {
        QuadratureSpec q = default_quadrature(inst.mu, 8);
        CHECK(g_star(spec, lp, inst.mu, inst.fs, x, q) ==
              Catch::Approx(g_star_naive(spec, lp, inst.mu, inst.fs, x, q)).epsilon(1e-12));
    }
    SECTION("truncation endpoints and window rejection") {
        CHECK(g_star_truncated(spec, lp, inst.mu, inst.fs, x, quad.t_min, quad) ==
              g_star(spec, lp, inst.mu, inst.fs, x, quad));
        CHECK(g_star_truncated(spec, lp, inst.mu, inst.fs, x, quad.t_max, quad) == 0.0);
        CHECK_THROWS_AS(g_star_truncated(spec, lp, inst.mu, inst.fs, x, quad.t_max * 2.0, quad),
                        config_error);
    }
    SECTION("local endpoints") {
        CHECK(g_star_local(spec, lp, inst.mu, inst.fs, x, Cube({0.0}, quad.t_min), quad) == 0.0);
        CHECK(g_star_local(spec, lp, inst.mu, inst.fs, x, Cube({0.0}, quad.t_max * 2.0), quad) ==
              g_star(spec, lp, inst.mu, inst.fs, x, quad));
    }
    SECTION("pythagorean split at a cell boundary") {
        const TimeGrid grid = make_grid(quad);
        const double cut = grid.boundaries[grid.boundaries.size() / 2];
        SquareFunctionEvaluator ev(spec, lp, inst.mu, inst.fs, quad);
        const double total = ev.g_star(x);
        const double local = ev.g_star_local(x, cut);
        const double truncated = ev.g_star_truncated(x, cut);
        CHECK(local * local + truncated * truncated ==
              Catch::Approx(total * total).epsilon(1e-12));
    }
    SECTION("local + refined reference") {
        const TimeGrid grid = make_grid(quad);
        const double cut = grid.boundaries[grid.boundaries.size() / 3];
        QuadratureSpec fine = quad;
        fine.nodes_per_decade = quad.nodes_per_decade * 8;
        const double v = g_star_local(spec, lp, inst.mu, inst.fs, x, Cube({0.0}, cut), quad);
        const double ref = g_star_local(spec, lp, inst.mu, inst.fs, x, Cube({0.0}, cut), fine);
        CHECK(v == Catch::Approx(ref).epsilon(2e-3));
    }
}

TEST_CASE("lusin area integral", "[operators]") {
    KernelSpec spec;
    const LambdaParams lp(5.0, spec);
    SECTION("zero input") {
        AtomicMeasure mu(1, {{0.0}}, {1.0});
        std::vector<SampledFunction> zero(2, SampledFunction::constant(mu, 0.0));
        CHECK(lusin_area(spec, mu, zero, Point{0.0}, default_quadrature(mu)) == 0.0);
    }
    SECTION("single atom at the apex: cone weight is 1") {
        AtomicMeasure mu(1, {{0.0}}, {2.0});
        std::vector<SampledFunction> fs{SampledFunction(mu, {1.0}), SampledFunction(mu, {3.0})};
        const QuadratureSpec quad = default_quadrature(mu);
        const TimeGrid grid = make_grid(quad);
        double oracle = 0.0;
        for (double t : grid.nodes) {
            const double th = theta(spec, mu, fs, mu.position(0), t);
            oracle += th * th * 2.0 / std::pow(t, spec.m) * grid.dlog;
        }
        CHECK(lusin_area(spec, mu, fs, Point{0.0}, quad) ==
              Catch::Approx(std::sqrt(oracle)).epsilon(1e-13));
    }
    SECTION("cone domination by g_star at shared nodes") {
        Rng rng(12);
        for (int trial = 0; trial < 8; ++trial) {
            Instance inst = random_instance(rng, 1, 12 + trial, 2);
            const QuadratureSpec quad = default_quadrature(inst.mu, 8);
            SquareFunctionEvaluator ev(spec, lp, inst.mu, inst.fs, quad);
            const Point x{rng.uniform(-1.0, 5.0)};
            const double bound = std::pow(2.0, lp.m * lp.lambda / 2.0) * ev.g_star(x);
            CHECK(ev.lusin(x) <= bound * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("tail operator", "[operators]") {
    KernelSpec spec;
    const LambdaParams lp(5.0, spec);
    Rng rng(13);
    Instance inst = random_instance(rng, 1, 18, 2, 6.0);
    const Cube q({2.0}, 1.5);
    const QuadratureSpec quad = default_quadrature(inst.mu, 8);
    const std::vector<TailSlot> far_near{TailSlot::Far, TailSlot::Near};

    SECTION("identical evaluation points give zero") {
        CHECK(tail_norm(spec, lp, inst.mu, inst.fs, far_near, Point{2.0}, Point{2.0}, q, 1.0, quad) ==
              0.0);
    }
    SECTION("far slot with no far mass gives zero") {
        std::vector<SampledFunction> fs = inst.fs;
        fs[0] = fs[0].restricted(q.dilated(2.0), true);   // supported inside 2Q
        CHECK(tail_norm(spec, lp, inst.mu, fs, far_near, Point{1.7}, Point{2.4}, q, 1.0, quad) == 0.0);
    }
    SECTION("all-near pattern rejected") {
        CHECK_THROWS_AS(tail_norm(spec, lp, inst.mu, inst.fs, {TailSlot::Near, TailSlot::Near},
                                  Point{2.0}, Point{2.1}, q, 1.0, quad),
                        config_error);
    }
    SECTION("x outside Q rejected") {
        CHECK_THROWS_AS(tail_norm(spec, lp, inst.mu, inst.fs, far_near, Point{9.0}, Point{2.0}, q,
                                  1.0, quad),
                        config_error);
    }
    SECTION("matches the nested oracle") {
        for (int trial = 0; trial < 6; ++trial) {
            const Point x{rng.uniform(1.3, 2.7)};
            const Point xp{rng.uniform(1.3, 2.7)};
            for (const auto& pattern :
                 {std::vector<TailSlot>{TailSlot::Far, TailSlot::Near},
                  std::vector<TailSlot>{TailSlot::Far, TailSlot::Far},
                  std::vector<TailSlot>{TailSlot::Near, TailSlot::Far}}) {
                const double fast = tail_norm(spec, lp, inst.mu, inst.fs, pattern, x, xp, q, 1.0, quad);
                const double naive =
                    tail_norm(spec, lp, inst.mu, inst.fs, pattern, x, xp, q, 1.0, quad, true);
                CHECK(fast == Catch::Approx(naive).epsilon(1e-9).margin(1e-18));
            }
        }
    }
}

TEST_CASE("pruned evaluation stays within oracle tolerance", "[operators]") {
    KernelSpec spec;
    const LambdaParams lp(5.0, spec);
    Rng rng(14);
    for (int trial = 0; trial < 5; ++trial) {
        Instance inst = random_instance(rng, 1, 120 + 16 * trial, 2, 20.0);
        QuadratureSpec pruned = default_quadrature(inst.mu, 6);
        pruned.prune_tol = 1e-14;
        QuadratureSpec plain = pruned;
        plain.prune_tol = 0.0;
        const Point x{rng.uniform(0.0, 20.0)};
        const double a = g_star(spec, lp, inst.mu, inst.fs, x, pruned);
        const double b = g_star_naive(spec, lp, inst.mu, inst.fs, x, plain);
        CHECK(a == Catch::Approx(b).epsilon(1e-9));
    }
}
