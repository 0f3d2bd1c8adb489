#include <catch2/catch_amalgamated.hpp>

#include "gstar/operators.hpp"

using namespace gstar;

TEST_CASE("kernel evaluation against the closed form", "[kernel]") {
    KernelSpec spec;   // product_poisson, m = alpha = amplitude = 1, kappa = 2
    SECTION("coincident points") {
        CHECK(eval_kernel(spec, Point{0.0}, {{0.0}, {0.0}}, 1.0) == 1.0);
    }
    SECTION("one separated slot") {
        CHECK(eval_kernel(spec, Point{0.0}, {{1.0}, {0.0}}, 1.0) == Catch::Approx(0.25).margin(1e-15));
    }
    SECTION("far-field size decay") {
        for (double r : {10.0, 100.0}) {
            const double v = eval_kernel(spec, Point{0.0}, {{r}, {0.0}}, 1.0);
            CHECK(v <= std::pow(r, -(spec.m + spec.alpha)));
        }
    }
    SECTION("t <= 0 rejected") {
        CHECK_THROWS_AS(eval_kernel(spec, Point{0.0}, {{0.0}, {0.0}}, 0.0), config_error);
    }
    SECTION("slot permutation symmetry") {
        Rng rng(2);
        for (int k = 0; k < 50; ++k) {
            const Point x{rng.normal()};
            const Point y1{rng.normal()}, y2{rng.normal()};
            const double t = rng.log_uniform(0.01, 100.0);
            CHECK(eval_kernel(spec, x, {y1, y2}, t) == eval_kernel(spec, x, {y2, y1}, t));
        }
    }
}

TEST_CASE("poisson scaling invariance", "[kernel]") {
    KernelSpec spec;
    spec.m = 1.5;
    spec.alpha = 0.75;
    Rng rng(4);
    for (int k = 0; k < 40; ++k) {
        const double c = rng.log_uniform(0.1, 10.0);
        const Point x{rng.normal(), rng.normal()};
        const std::vector<Point> ys{{rng.normal(), rng.normal()}, {rng.normal(), rng.normal()}};
        const double t = rng.log_uniform(0.05, 20.0);
        Point cx{c * x[0], c * x[1]};
        std::vector<Point> cys{{c * ys[0][0], c * ys[0][1]}, {c * ys[1][0], c * ys[1][1]}};
        const double lhs = eval_kernel(spec, cx, cys, c * t);
        const double rhs = std::pow(c, -spec.kappa * spec.m) * eval_kernel(spec, x, ys, t);
        CHECK(lhs == Catch::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("size condition check", "[kernel]") {
    SECTION("poisson saturates the bound exactly") {
        KernelSpec spec;
        spec.amplitude = 2.5;
        const ConditionReport rep = check_size(spec, 1, 500, 42);
        CHECK(rep.max_ratio == 2.5);
        CHECK(rep.samples_used == 500);
    }
    SECTION("gaussian stays below the bound") {
        KernelSpec spec;
        spec.family = KernelFamily::ProductGaussian;
        const ConditionReport rep = check_size(spec, 2, 2000, 7);
        CHECK(rep.max_ratio <= 1.0 + 1e-12);
        CHECK(rep.max_ratio > 0.1);
    }
    SECTION("gaussian factor bound by dense 1-d scan") {
        for (double m : {0.5, 1.0, 2.0})
            for (double alpha : {0.25, 1.0, 1.5}) {
                const double c = gaussian_norm_constant(m, alpha);
                double worst = 0.0;
                for (int i = 0; i <= 200000; ++i) {
                    const double u = 20.0 * i / 200000.0;
                    worst = std::max(worst, c * std::exp(-u * u) * std::pow(1.0 + u, m + alpha));
                }
                CHECK(worst <= 1.0 + 1e-12);
                CHECK(worst >= 1.0 - 1e-4);   // the normalisation is tight
            }
    }
    SECTION("deterministic witness for a fixed seed") {
        KernelSpec spec;
        const ConditionReport a = check_size(spec, 1, 1, 99);
        const ConditionReport b = check_size(spec, 1, 1, 99);
        CHECK(a.witness.t == b.witness.t);
        CHECK(a.witness.x == b.witness.x);
        CHECK(a.max_ratio == b.max_ratio);
    }
}

TEST_CASE("hoelder condition check", "[kernel]") {
    KernelSpec spec;
    SECTION("finite ratio, all slots exercised, determinism") {
        const ConditionReport rep = check_holder(spec, 1, 3000, 12);
        CHECK(std::isfinite(rep.max_ratio));
        CHECK(rep.max_ratio > 0.0);
        REQUIRE(rep.slot_max.size() == 3);
        for (double s : rep.slot_max) CHECK(s > 0.0);
        CHECK(rep.max_ratio == std::max({rep.slot_max[0], rep.slot_max[1], rep.slot_max[2]}));
        const ConditionReport rep2 = check_holder(spec, 1, 3000, 12);
        CHECK(rep.max_ratio == rep2.max_ratio);
    }
    SECTION("monte-carlo stability when samples double") {
        const ConditionReport small = check_holder(spec, 1, 10000, 31);
        const ConditionReport big = check_holder(spec, 1, 20000, 31);
        CHECK(big.max_ratio >= small.max_ratio);   // same leading stream
        CHECK((big.max_ratio - small.max_ratio) / small.max_ratio <= 0.05);
    }
}

TEST_CASE("theorem hypothesis window", "[kernel]") {
    KernelSpec spec;   // kappa=2, m=1, alpha=1
    CHECK(hypothesis_ok(spec, LambdaParams(5.0, spec)));
    CHECK_FALSE(hypothesis_ok(spec, LambdaParams(4.0, spec)));   // lambda must exceed 2 kappa
    spec.alpha = 1.2;
    CHECK_FALSE(hypothesis_ok(spec, LambdaParams(5.0, spec)));   // alpha > m (lambda - 2 kappa)
    CHECK(hypothesis_ok(spec, LambdaParams(6.0, spec)));
}
