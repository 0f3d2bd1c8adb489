// Experiment runner for the square-function library: loads a JSON experiment
// config, dispatches to the library, writes CSV/JSON artifacts. Exit codes:
// 0 success, 2 config error, 3 assertion/pass-criterion failure, 4 NaN.

#include <CLI11.hpp>

#include <atomic>
#include <fstream>
#include <iostream>
#include <thread>

#include "gstar/io.hpp"
#include "gstar/verify.hpp"

using namespace gstar;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Options {
    std::string config_path;
    std::string out_path = "gstar_out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 1;
    bool oracle = false;
    bool dump_nodes = false;
    std::string lemma;
};

json load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("cannot open config file: " + path);
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw config_error("config parse error in " + path + ": " + e.what());
    }
}

json sub_config(const json& cfg, const char* key) {
    return cfg.contains(key) ? cfg.at(key) : json::object();
}

// measures may be inline or referenced by path relative to the cwd
AtomicMeasure resolve_measure(const json& cfg) {
    if (!cfg.contains("measure")) throw config_error("config: missing 'measure'");
    const json& j = cfg.at("measure");
    if (j.contains("path")) return measure_from_json(load_config(j.at("path").get<std::string>()));
    return measure_from_json(j);
}

SignedMeasure resolve_signed(const json& cfg) {
    if (!cfg.contains("signed_measure")) throw config_error("config: missing 'signed_measure'");
    const json& j = cfg.at("signed_measure");
    if (j.contains("path")) return signed_from_json(load_config(j.at("path").get<std::string>()));
    return signed_from_json(j);
}

std::uint64_t resolve_seed(const Options& opt, const json& cfg) {
    if (opt.seed_set) return opt.seed;
    return cfg.value("seed", 1);
}

std::vector<SampledFunction> resolve_functions(const json& cfg, const AtomicMeasure& mu, int kappa,
                                               std::uint64_t seed) {
    std::vector<SampledFunction> fs;
    const json list = cfg.contains("functions") ? cfg.at("functions") : json::array();
    for (std::size_t i = 0; i < list.size(); ++i) {
        const json& j = list[i];
        if (j.contains("values")) {
            fs.emplace_back(mu, j.at("values").get<std::vector<double>>());
        } else if (j.contains("constant")) {
            fs.push_back(SampledFunction::constant(mu, j.at("constant").get<double>()));
        } else if (j.contains("indicator")) {
            const json& q = j.at("indicator");
            fs.push_back(SampledFunction::indicator(
                mu, Cube(q.at("center").get<Point>(), q.at("side").get<double>())));
        } else if (j.contains("random")) {
            Rng rng = Rng::stream(seed, 0xF0 + i);
            fs.push_back(synth::random_function(rng, mu, j.at("random").value("lo", -1.0),
                                                j.at("random").value("hi", 1.0)));
        } else {
            throw config_error("config: function spec needs values/constant/indicator/random");
        }
    }
    while (static_cast<int>(fs.size()) < kappa && !fs.empty()) fs.push_back(fs.back());
    if (static_cast<int>(fs.size()) != kappa)
        throw config_error("config: expected kappa function entries under 'functions'");
    return fs;
}

std::vector<Point> resolve_eval_points(const json& cfg, const AtomicMeasure& mu) {
    if (!cfg.contains("eval_points")) throw config_error("config: missing 'eval_points'");
    const json& j = cfg.at("eval_points");
    std::vector<Point> pts;
    if (j.is_array()) {
        for (const json& row : j) pts.push_back(row.get<Point>());
    } else if (j.value("atoms", false)) {
        for (std::size_t i = 0; i < mu.size(); ++i)
            pts.emplace_back(mu.position(i).begin(), mu.position(i).end());
    } else if (j.contains("grid")) {
        const Point lo = j.at("grid").at("lo").get<Point>();
        const Point hi = j.at("grid").at("hi").get<Point>();
        const int count = j.at("grid").value("count", 16);
        if (lo.size() != hi.size() || count < 1) throw config_error("config: bad eval grid");
        std::vector<int> idx(lo.size(), 0);
        while (true) {
            Point p(lo.size());
            for (std::size_t d = 0; d < lo.size(); ++d)
                p[d] = count == 1 ? lo[d] : lo[d] + (hi[d] - lo[d]) * idx[d] / (count - 1);
            pts.push_back(std::move(p));
            int d = static_cast<int>(lo.size()) - 1;
            while (d >= 0 && ++idx[d] == count) idx[d--] = 0;
            if (d < 0) break;
        }
    } else {
        throw config_error("config: eval_points must be a list, {\"atoms\":true} or {\"grid\":...});");
    }
    for (const Point& p : pts)
        if (static_cast<int>(p.size()) != mu.dim())
            throw config_error("config: eval point dimension mismatch");
    return pts;
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    threads = std::max(1, threads);
    if (threads == 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) fn(i);
        });
    for (std::thread& t : pool) t.join();
}

void stamp(CsvWriter& csv, const char* command, const json& resolved, std::uint64_t seed,
           bool oracle) {
    csv.comment(std::string("gstar ") + kVersion);
    csv.comment(std::string("command: ") + command);
    csv.comment("seed: " + std::to_string(seed));
    csv.comment(std::string("oracle: ") + (oracle ? "1" : "0"));
    csv.comment("config: " + resolved.dump());
}

void write_json(const json& j, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw config_error("cannot open output file: " + path);
    f << j.dump(2) << "\n";
}

json index_to_json(const std::vector<long long>& idx) {
    json a = json::array();
    for (long long v : idx) a.push_back(v);
    return a;
}

std::string index_to_text(const std::vector<long long>& idx) {
    std::string s;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (i) s += ";";
        s += std::to_string(idx[i]);
    }
    return s;
}

// ---------------------------------------------------------------- eval/lusin

int run_eval(const Options& opt, const json& cfg, bool lusin_only) {
    const AtomicMeasure mu = resolve_measure(cfg);
    const std::uint64_t seed = resolve_seed(opt, cfg);
    const KernelSpec spec = kernel_from_json(sub_config(cfg, "kernel"));
    const LambdaParams lp(cfg.value("lambda", 2.0 * spec.kappa + 1.0), spec);
    QuadratureSpec quad = quadrature_from_json(sub_config(cfg, "quadrature"), mu);
    if (opt.oracle) quad.prune_tol = 0.0;
    const std::vector<SampledFunction> fs = resolve_functions(cfg, mu, spec.kappa, seed);
    const std::vector<Point> pts = resolve_eval_points(cfg, mu);

    const SquareFunctionEvaluator ev(spec, lp, mu, fs, quad, opt.oracle);
    std::vector<double> gs(pts.size()), lus(pts.size());
    parallel_for(pts.size(), opt.threads, [&](std::size_t i) {
        gs[i] = ev.g_star(pts[i]);
        lus[i] = ev.lusin(pts[i]);
    });

    json resolved{{"kernel", kernel_to_json(spec)},
                  {"lambda", lp.lambda},
                  {"quadrature", quadrature_to_json(quad)},
                  {"points", pts.size()},
                  {"atoms", mu.size()}};
    CsvWriter csv;
    stamp(csv, lusin_only ? "lusin" : "eval", resolved, seed, opt.oracle);
    std::vector<std::string> header;
    for (int d = 1; d <= mu.dim(); ++d) header.push_back("x_" + std::to_string(d));
    if (lusin_only) {
        header.push_back("lusin");
    } else {
        header.push_back("g_star");
        header.push_back("lusin");
    }
    csv.header(header);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::vector<double> row(pts[i]);
        if (!lusin_only) row.push_back(gs[i]);
        row.push_back(lus[i]);
        csv.row(row);
    }
    csv.write(opt.out_path);

    if (opt.dump_nodes) {
        CsvWriter nodes;
        stamp(nodes, "eval-nodes", resolved, seed, opt.oracle);
        std::vector<std::string> nh = header;
        nh.resize(mu.dim());
        nh.push_back("t");
        nh.push_back("slice");
        nodes.header(nh);
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = 0; j < ev.grid().nodes.size(); ++j) {
                std::vector<double> row(pts[i]);
                row.push_back(ev.grid().nodes[j]);
                row.push_back(ev.slice(pts[i], j));
                nodes.row(row);
            }
        nodes.write(opt.out_path + ".nodes.csv");
    }
    return 0;
}

// ------------------------------------------------------------- dyadic family

int run_grid_sample(const Options& opt, const json& cfg) {
    const json o = sub_config(cfg, "options");
    const std::uint64_t seed = resolve_seed(opt, cfg);
    const ShiftSequence s = ShiftSequence::sample(seed, o.value("j_min", -8), o.value("j_max", 8),
                                                  o.value("n", 1));
    write_json(shift_to_json(s), opt.out_path);
    return 0;
}

ShiftSequence resolve_shift(const json& o, std::uint64_t seed, int fallback_lo, int fallback_hi, int n) {
    if (o.contains("shift")) {
        const json& s = o.at("shift");
        if (s.contains("bits")) return shift_from_json(s);
        return ShiftSequence::sample(s.value("seed", seed), s.value("j_min", fallback_lo),
                                     s.value("j_max", fallback_hi), n);
    }
    return ShiftSequence::zero(fallback_lo, fallback_hi, n);
}

int run_goodness(const Options& opt, const json& cfg) {
    const AtomicMeasure mu = resolve_measure(cfg);
    const std::uint64_t seed = resolve_seed(opt, cfg);
    const KernelSpec spec = kernel_from_json(sub_config(cfg, "kernel"));
    const json o = sub_config(cfg, "options");
    GoodnessParams gp = GoodnessParams::from_kernel(spec, o.value("r", VerifyConfig::separation_r));
    if (o.contains("gamma")) gp.gamma = o.at("gamma").get<double>();
    const int search = o.value("search_levels", gp.r + 20);
    const int level = o.value("level", 0);
    const ShiftSequence shift = resolve_shift(o, seed, level, level + search + 1, mu.dim());

    std::vector<DyadicCube> cubes;
    for (const auto& [idx, ids] : detail::occupied_cubes(mu, level, &shift))
        cubes.push_back(DyadicCube{level, idx, &shift});

    json resolved{{"r", gp.r}, {"gamma", gp.gamma}, {"search_levels", search}, {"level", level}};
    CsvWriter csv;
    stamp(csv, "goodness", resolved, seed, opt.oracle);
    csv.header({"level", "index", "good_in_window", "witness_J_level", "distance", "threshold"});
    for (const DyadicCube& c : cubes) {
        const GoodnessReport rep = is_good(c, gp, search);
        csv.row_text({std::to_string(c.level), index_to_text(c.index),
                      rep.good ? "1" : "0", std::to_string(rep.witness_level),
                      fmt17(rep.distance), fmt17(rep.threshold)});
    }
    csv.write(opt.out_path);
    return 0;
}

int run_bad_prob(const Options& opt, const json& cfg) {
    const std::uint64_t seed = resolve_seed(opt, cfg);
    const json o = sub_config(cfg, "options");
    const int n = o.value("n", 1);
    const int level = o.value("level", 0);
    const std::vector<long long> index =
        o.contains("index") ? o.at("index").get<std::vector<long long>>()
                            : std::vector<long long>(n, 0);
    const double gamma = o.value("gamma", 0.25);
    const int trials = o.value("trials", 10000);
    std::vector<int> rs = o.contains("r_list") ? o.at("r_list").get<std::vector<int>>()
                                               : std::vector<int>{2, 4, 6, 8};
    json resolved{{"n", n}, {"gamma", gamma}, {"trials", trials}, {"level", level}};
    CsvWriter csv;
    stamp(csv, "bad-prob", resolved, seed, opt.oracle);
    csv.header({"r", "search_levels", "estimate", "stderr", "trials"});
    for (int r : rs) {
        const int search = o.value("search_levels", r + 3);
        const BadProbEstimate e =
            bad_cube_probability(level, index, n, GoodnessParams{r, gamma}, search, trials, seed);
        csv.row_text({std::to_string(r), std::to_string(search), fmt17(e.estimate),
                      fmt17(e.std_error), std::to_string(e.trials)});
    }
    csv.write(opt.out_path);
    return 0;
}

int run_martingale(const Options& opt, const json& cfg) {
    const AtomicMeasure mu = resolve_measure(cfg);
    const std::uint64_t seed = resolve_seed(opt, cfg);
    std::vector<SampledFunction> fs = resolve_functions(cfg, mu, 1, seed);
    const json o = sub_config(cfg, "options");
    const int finest = o.value("finest_level", isolation_level(mu));
    const int top = o.value("top_level", top_level(mu));
    const ShiftSequence shift = resolve_shift(o, seed, finest, top + 2, mu.dim());

    const SampledFunction rec = reconstruct(fs[0], top, finest, mu, &shift);
    double rec_err = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i)
        rec_err = std::max(rec_err, std::abs(rec.values[i] - fs[0].values[i]));

    const double norm_sq = fs[0].l2_norm_sq();
    double sum_sq = 0.0, ortho = 0.0;
    std::vector<SampledFunction> diffs;
    for (const OccupiedCube& oc : occupied_range(mu, finest, top, &shift)) {
        SampledFunction d = martingale_diff(fs[0], oc.cube, mu);
        sum_sq += d.l2_norm_sq();
        if (oc.cube.level == top) sum_sq += cube_avg(fs[0], oc.cube, mu).l2_norm_sq();
        diffs.push_back(std::move(d));
    }
    Rng pick(seed + 1);
    for (int k = 0; k < o.value("orthogonality_pairs", 200); ++k) {
        const std::size_t a = static_cast<std::size_t>(pick.integer(0, diffs.size() - 1));
        const std::size_t b = static_cast<std::size_t>(pick.integer(0, diffs.size() - 1));
        if (a == b) continue;
        double inner = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i)
            inner += diffs[a].values[i] * diffs[b].values[i] * mu.weight(i);
        ortho = std::max(ortho, std::abs(inner));
    }
    const double pyth_rel = std::abs(sum_sq - norm_sq) / std::max(norm_sq, 1e-300);

    json rep{{"reconstruction_max_abs_error", require_finite(rec_err, "martingale")},
             {"pythagoras_relative_error", require_finite(pyth_rel, "martingale")},
             {"orthogonality_max_abs", require_finite(ortho, "martingale")},
             {"finest_level", finest},
             {"top_level", top},
             {"l2_norm_sq", norm_sq}};
    write_json(rep, opt.out_path);
    const bool ok = rec_err <= o.value("reconstruction_tol", 1e-10) &&
                    pyth_rel <= o.value("pythagoras_tol", 1e-10) &&
                    ortho <= o.value("orthogonality_tol", 1e-12) * norm_sq;
    if (!ok) throw check_failure("martingale identities exceeded tolerances");
    return 0;
}

// ------------------------------------------------------------ decompositions

int run_whitney(const Options& opt, const json& cfg) {
    const AtomicMeasure mu = resolve_measure(cfg);
    const json o = sub_config(cfg, "options");
    OpenBoxUnion omega;
    for (const json& b : o.at("boxes"))
        omega.boxes.push_back({b.at("lo").get<Point>(), b.at("hi").get<Point>()});
    WhitneyOptions wopt;
    wopt.rho = o.value("rho", 21.0);
    const WhitneyResult res = whitney(omega, mu, wopt);

    CsvWriter csv;
    stamp(csv, "whitney", json{{"rho", wopt.rho}, {"boxes", o.at("boxes").size()}},
          resolve_seed(opt, cfg), opt.oracle);
    csv.header({"level", "index", "center", "side", "in_subfamily"});
    for (std::size_t i = 0; i < res.cubes.size(); ++i) {
        const bool chosen =
            std::find(res.subfamily.begin(), res.subfamily.end(), i) != res.subfamily.end();
        std::string center;
        for (int d = 0; d < mu.dim(); ++d)
            center += (d ? ";" : "") + fmt17(res.cubes[i].realized.center[d]);
        csv.row_text({std::to_string(res.cubes[i].cube.level), index_to_text(res.cubes[i].cube.index),
                      center, fmt17(res.cubes[i].realized.side), chosen ? "1" : "0"});
    }
    csv.write(opt.out_path);

    json rep{{"cubes", res.cubes.size()},
             {"rho", res.rho},
             {"rho0", res.rho0},
             {"property1_ok", res.property1_ok},
             {"property2_ok", res.property2_ok},
             {"omega_mass", res.omega_mass},
             {"subfamily_mass", res.tilde_mass},
             {"subfamily_size", res.subfamily.size()},
             {"mass_bound_ok", res.tilde_mass >= res.omega_mass / (8.0 * res.rho0)}};
    write_json(rep, opt.out_path + ".report.json");
    if (!res.property1_ok || !res.property2_ok || res.tilde_mass < res.omega_mass / (8.0 * res.rho0))
        throw check_failure("whitney properties failed");
    return 0;
}

int run_czdecomp(const Options& opt, const json& cfg) {
    const AtomicMeasure mu = resolve_measure(cfg);
    const SignedMeasure nu = resolve_signed(cfg);
    const json o = sub_config(cfg, "options");
    CZOptions copt;
    copt.m = kernel_from_json(sub_config(cfg, "kernel")).m;
    if (o.contains("eta_grid")) copt.eta_grid = o.at("eta_grid").get<std::vector<double>>();
    const double floor_xi = std::ldexp(1.0, mu.dim() + 1) * nu.total_variation() / mu.total_mass();
    const double xi = o.contains("xi") ? o.at("xi").get<double>() : 3.0 * floor_xi;
    const CZResult res = cz_decompose(nu, mu, xi, copt);

    json cubes = json::array();
    for (const CZCube& c : res.cubes) {
        cubes.push_back(json{{"level", c.cube.level},
                             {"index", index_to_json(c.cube.index)},
                             {"center", c.realized.center},
                             {"side", c.realized.side},
                             {"companion_side", c.companion.side},
                             {"companion_power", c.companion_power},
                             {"phi_constant", c.phi_constant},
                             {"nu_variation", c.nu_variation},
                             {"beta_total_mass", c.beta.total_mass()}});
    }
    json rep{{"xi", xi},
             {"cubes", std::move(cubes)},
             {"cz1_ok", res.cz1_ok},
             {"cz2_ok", res.cz2_ok},
             {"cz3_ok", res.cz3_ok},
             {"cz5_constant", res.cz5_constant},
             {"cz6_constant", res.cz6_constant}};
    write_json(rep, opt.out_path);
    std::cout << "cz: " << res.cubes.size() << " cubes at xi=" << fmt17(xi)
              << "  (C-Z-5) " << fmt17(res.cz5_constant) << "  (C-Z-6) " << fmt17(res.cz6_constant)
              << "\n";
    if (!res.cz1_ok || !res.cz2_ok || !res.cz3_ok)
        throw check_failure("cz decomposition properties failed");
    return 0;
}

// --------------------------------------------------------------- verify family

int run_verify_lemma(const Options& opt, const json& cfg) {
    const std::uint64_t seed = resolve_seed(opt, cfg);
    const KernelSpec spec = kernel_from_json(sub_config(cfg, "kernel"));
    const LambdaParams lp(cfg.value("lambda", 2.0 * spec.kappa + 1.0), spec);
    const json o = sub_config(cfg, "options");
    SuiteOptions sopt;
    sopt.samples = o.value("samples", 200);
    sopt.calibration_seed = o.value("calibration_seed", 71);
    sopt.test_seed = o.value("test_seed", 72);
    sopt.corrupt = o.value("corrupt", false);

    std::vector<InequalityReport> reports;
    if (opt.lemma == "U") {
        const AtomicMeasure mu = cfg.contains("measure") ? resolve_measure(cfg) : [&] {
            Rng rng(seed);
            return synth::random_measure(rng, o.value("n", 1), o.value("atoms", 50), 6.0);
        }();
        const LemmaUReport rep = check_lemma_U(spec, lp, mu, sopt);
        reports = {rep.domination, rep.lipschitz};
    } else if (opt.lemma == "T") {
        const AtomicMeasure mu = cfg.contains("measure") ? resolve_measure(cfg) : [&] {
            Rng rng(seed);
            return synth::random_measure(rng, o.value("n", 1), o.value("atoms", 50), 6.0);
        }();
        const QuadratureSpec quad = quadrature_from_json(sub_config(cfg, "quadrature"), mu);
        Cube q({3.0}, 2.0);
        if (o.contains("cube"))
            q = Cube(o.at("cube").at("center").get<Point>(), o.at("cube").at("side").get<double>());
        reports = check_lemma_T(spec, lp, mu, q, o.value("c0", VerifyConfig::tail_c0), quad, sopt);
    } else if (opt.lemma == "beta") {
        BetaSuiteOptions bopt;
        bopt.instances = o.value("instances", 5);
        bopt.x_per_instance = o.value("x_per_instance", 12);
        bopt.calibration_seed = o.value("calibration_seed", 21);
        bopt.test_seed = o.value("test_seed", 22);
        bopt.corrupt = o.value("corrupt", false);
        bopt.dim = o.value("n", 1);
        reports = check_pointwise_beta_suite(spec, lp, bopt);
    } else {
        throw config_error("--lemma must be one of U, T, beta");
    }

    json jreports = json::array();
    CsvWriter csv;
    stamp(csv, "verify-lemma", json{{"lemma", opt.lemma}}, seed, opt.oracle);
    csv.header({"lemma", "pass", "C", "calibration_max", "test_max"});
    bool all_pass = true;
    for (const InequalityReport& r : reports) {
        jreports.push_back(json{{"lemma", r.lemma},
                                {"pass", r.pass},
                                {"constant", r.constant},
                                {"calibration_max", r.calibration_max},
                                {"test_max", r.test_max},
                                {"calibration_samples", r.calibration_samples},
                                {"test_samples", r.test_samples}});
        csv.row_text({r.lemma, r.pass ? "1" : "0", fmt17(r.constant), fmt17(r.calibration_max),
                      fmt17(r.test_max)});
        all_pass &= r.pass;
    }
    write_json(jreports, opt.out_path);
    csv.write(opt.out_path + ".csv");
    if (!all_pass) throw check_failure("lemma suite failed the calibration protocol");
    return 0;
}

Cube cube_from_json(const json& j) {
    return Cube(j.at("center").get<Point>(), j.at("side").get<double>());
}

int run_testing_condition(const Options& opt, const json& cfg, TestingConditionResult* out_res,
                          Cube* out_cube) {
    const AtomicMeasure mu = resolve_measure(cfg);
    const KernelSpec spec = kernel_from_json(sub_config(cfg, "kernel"));
    const LambdaParams lp(cfg.value("lambda", 2.0 * spec.kappa + 1.0), spec);
    const QuadratureSpec quad = quadrature_from_json(sub_config(cfg, "quadrature"), mu);
    const json o = sub_config(cfg, "options");
    const Cube q = cube_from_json(o.at("cube"));
    const double p0 = o.value("p0", 2.0);
    const double delta0 = o.value("delta0", 0.5);

    std::vector<std::size_t> h_q;
    if (o.contains("h_q_atoms")) h_q = o.at("h_q_atoms").get<std::vector<std::size_t>>();
    TestingConditionResult res =
        check_testing_condition(spec, lp, mu, q, h_q, p0, delta0, o.value("zeta_count", 40), quad);
    if (o.value("h_q_adversarial", false)) {
        h_q = adversarial_exceptional_set(mu, res.q_atoms, res.values, delta0);
        res = check_testing_condition(spec, lp, mu, q, h_q, p0, delta0, o.value("zeta_count", 40), quad);
    }

    json rep{{"C0_exact", require_finite(res.c0_exact, "testing-condition")},
             {"C0_grid", res.c0_grid},
             {"precondition_ok", res.precondition_ok},
             {"mass_q", res.mass_q},
             {"q_atom_count", res.q_atoms.size()},
             {"h_q", h_q}};
    write_json(rep, opt.out_path);
    if (out_res) *out_res = res;
    if (out_cube) *out_cube = q;
    if (!res.precondition_ok) throw check_failure("testing condition precondition mu(H_Q) <= delta0 mu(Q) failed");
    return 0;
}

int run_big_piece(const Options& opt, const json& cfg) {
    const AtomicMeasure mu = resolve_measure(cfg);
    const json o = sub_config(cfg, "options");
    Options inner = opt;
    inner.out_path = opt.out_path + ".testing.json";
    TestingConditionResult tc;
    Cube q;
    run_testing_condition(inner, cfg, &tc, &q);
    const double p0 = o.value("p0", 2.0);
    const double delta0 = o.value("delta0", 0.5);
    const double c0 = o.contains("C0") ? o.at("C0").get<double>() : tc.c0_exact;

    std::vector<std::size_t> h_q;
    if (o.contains("h_q_atoms")) h_q = o.at("h_q_atoms").get<std::vector<std::size_t>>();
    if (o.value("h_q_adversarial", false))
        h_q = adversarial_exceptional_set(mu, tc.q_atoms, tc.values, delta0);

    const BigPieceResult bp = big_piece(mu, tc.q_atoms, tc.values, h_q, p0, delta0, c0);
    json rep{{"zeta0", bp.zeta0},
             {"C0", c0},
             {"mass_q", bp.mass_q},
             {"mass_h", bp.mass_h},
             {"mass_s_off_h", bp.mass_s_off_h},
             {"mass_g", bp.mass_g},
             {"required_fraction", (1.0 - delta0) / 2.0},
             {"pass", bp.pass}};
    write_json(rep, opt.out_path);
    if (!bp.pass) throw check_failure("big piece mass bound failed");
    return 0;
}

int run_good_lambda(const Options& opt, const json& cfg) {
    const AtomicMeasure mu = resolve_measure(cfg);
    const std::uint64_t seed = resolve_seed(opt, cfg);
    const KernelSpec spec = kernel_from_json(sub_config(cfg, "kernel"));
    const LambdaParams lp(cfg.value("lambda", 2.0 * spec.kappa + 1.0), spec);
    const QuadratureSpec quad = quadrature_from_json(sub_config(cfg, "quadrature"), mu);
    const std::vector<SampledFunction> fs = resolve_functions(cfg, mu, spec.kappa, seed);
    const json o = sub_config(cfg, "options");
    const double t0 = o.value("t0", quad.t_min);
    const double eps = o.value("epsilon", 0.5);
    const double delta = o.value("delta", 1e-3);
    const double theta = o.value("theta", 0.5);
    const double rho0 = o.value("rho0", 1.0);

    std::vector<double> grid;
    if (o.contains("xi_grid")) {
        grid = o.at("xi_grid").get<std::vector<double>>();
    } else {
        SquareFunctionEvaluator ev(spec, lp, mu, fs, quad);
        double vmax = 0.0, vmin = INFINITY;
        for (std::size_t i = 0; i < mu.size(); ++i) {
            const double v = ev.g_star_truncated(mu.position(i), t0);
            vmax = std::max(vmax, v);
            if (v > 0.0) vmin = std::min(vmin, v);
        }
        const int count = o.value("xi_count", 40);
        for (int k = 0; k < count; ++k)
            grid.push_back(vmin * std::exp(k * std::log(vmax / vmin) / std::max(1, count - 1)));
    }
    const GoodLambdaResult res =
        check_good_lambda(spec, lp, mu, fs, t0, eps, delta, grid, theta, rho0, quad);
    json per_xi = json::array();
    for (std::size_t k = 0; k < grid.size(); ++k)
        per_xi.push_back(json{{"xi", grid[k]}, {"holds", static_cast<bool>(res.holds[k])}});
    json rep{{"fraction_holding", res.fraction},
             {"delta_star", require_finite(res.delta_star, "good-lambda")},
             {"epsilon", eps},
             {"theta", theta},
             {"rho0", rho0},
             {"per_xi", std::move(per_xi)},
             {"pass", res.pass}};
    write_json(rep, opt.out_path);
    if (!res.pass) throw check_failure("good-lambda bisection found no positive delta");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"square-function experiments over finitely atomic measures"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    Options opt;
    const std::vector<std::string> names = {"eval",          "lusin",     "grid-sample",
                                            "goodness",      "bad-prob",  "martingale",
                                            "whitney",       "czdecomp",  "verify-lemma",
                                            "testing-condition", "good-lambda", "big-piece"};
    for (const std::string& name : names) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", opt.config_path, "experiment config (JSON)")->required();
        sub->add_option("--out", opt.out_path, "output path");
        sub->add_option("--seed", opt.seed, "seed override")->trigger_on_parse()
            ->each([&opt](const std::string&) { opt.seed_set = true; });
        sub->add_option("--threads", opt.threads, "parallelism cap");
        sub->add_flag("--oracle", opt.oracle, "naive unpruned evaluation everywhere");
        if (name == "eval") sub->add_flag("--nodes", opt.dump_nodes, "dump per-node slices");
        if (name == "verify-lemma")
            sub->add_option("--lemma", opt.lemma, "lemma id: U, T or beta")->required();
    }

    CLI11_PARSE(app, argc, argv);
    try {
        const json cfg = load_config(opt.config_path);
        const std::string name = app.get_subcommands().front()->get_name();
        if (name == "eval") return run_eval(opt, cfg, false);
        if (name == "lusin") return run_eval(opt, cfg, true);
        if (name == "grid-sample") return run_grid_sample(opt, cfg);
        if (name == "goodness") return run_goodness(opt, cfg);
        if (name == "bad-prob") return run_bad_prob(opt, cfg);
        if (name == "martingale") return run_martingale(opt, cfg);
        if (name == "whitney") return run_whitney(opt, cfg);
        if (name == "czdecomp") return run_czdecomp(opt, cfg);
        if (name == "verify-lemma") return run_verify_lemma(opt, cfg);
        if (name == "testing-condition") return run_testing_condition(opt, cfg, nullptr, nullptr);
        if (name == "good-lambda") return run_good_lambda(opt, cfg);
        if (name == "big-piece") return run_big_piece(opt, cfg);
        std::cerr << "unknown subcommand\n";
        return 2;
    } catch (const nan_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const check_failure& e) {
        std::cerr << "check failed: " << e.what() << "\n";
        return 3;
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
