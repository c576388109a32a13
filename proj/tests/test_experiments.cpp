#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "stretchperc/crossings.hpp"
#include "stretchperc/experiments.hpp"

using namespace stretchperc;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string unique_tmp(const char* tag) {
    static std::atomic<int> counter{0};
    return std::string("/tmp/stretchperc_test_") + tag + "_" +
           std::to_string(counter.fetch_add(1)) + ".jsonl";
}

}  // namespace

TEST_CASE("parallel_for fills slots identically at any thread count") {
    const int64_t n = 997;
    std::vector<int64_t> serial(n), wide(n);
    auto body = [](std::vector<int64_t>& out) {
        return [&out](int64_t i) { out[size_t(i)] = i * i % 101; };
    };
    parallel_for(n, 1, body(serial));
    parallel_for(n, 8, body(wide));
    CHECK(serial == wide);

    parallel_for(0, 8, [](int64_t) { FAIL("body ran for empty range"); });
}

TEST_CASE("parallel_for propagates the first worker exception") {
    CHECK_THROWS_AS(parallel_for(64, 4,
                                 [](int64_t i) {
                                     if (i == 17) throw SpecError("worker failure");
                                 }),
                    SpecError);
}

TEST_CASE("config parsing reads fields and rejects unknown keys") {
    ExperimentConfig cfg = parse_config(
        "spec = geometric:0.5\n"
        "formulation = inhomogeneous\n"
        "p_grid = 0.3, 0.5, 0.7\n"
        "box = 16\n"
        "replicas = 40\n"
        "seed = 99\n"
        "threads = 2\n"
        "tasks = sweep\n"
        "out = /tmp/somewhere.jsonl\n");
    CHECK(cfg.spec.compact() == "geometric:0.5");
    CHECK(cfg.formulation == Formulation::inhomogeneous);
    CHECK(cfg.p_grid == std::vector<double>{0.3, 0.5, 0.7});
    CHECK(cfg.box == 16);
    CHECK(cfg.replicas == 40);
    CHECK(cfg.seed == 99);
    CHECK(cfg.threads == 2);
    CHECK(cfg.tasks == std::vector<std::string>{"sweep"});
    CHECK(cfg.out == "/tmp/somewhere.jsonl");

    CHECK_THROWS_AS(parse_config("boxx = 16\n"), SpecError);
    CHECK_THROWS_AS(parse_config("tasks = sweeep\n"), SpecError);
    CHECK_THROWS_AS(parse_config("p_grid = 0.5, 1.5\n"), SpecError);
    CHECK_THROWS_AS(parse_config("replicas = 0\n"), SpecError);

    // hash ignores key order but sees every value
    ExperimentConfig a = parse_config("box = 16\nseed = 7\n");
    ExperimentConfig b = parse_config("seed = 7\nbox = 16\n");
    ExperimentConfig c = parse_config("seed = 8\nbox = 16\n");
    CHECK(a.config_hash() == b.config_hash());
    CHECK(a.config_hash() != c.config_hash());
}

TEST_CASE("sweep endpoints are exact and the curve is monotone") {
    ExperimentConfig cfg = parse_config(
        "spec = det:1\n"
        "p_grid = 0, 0.5, 1\n"
        "box = 8\n"
        "replicas = 60\n");
    RngStream rng(42, 0);
    SweepResult res = sweep_p(cfg, rng, 2);
    REQUIRE(res.curve.size() == 3);
    CHECK(res.curve[0].hits == 0);
    CHECK(res.curve[2].hits == 60);
    for (size_t g = 1; g < res.curve.size(); ++g)
        CHECK(res.curve[g].hits >= res.curve[g - 1].hits);

    // identical master stream: identical numbers, any thread count
    RngStream r1(42, 0), r2(42, 0);
    SweepResult s1 = sweep_p(cfg, r1, 1);
    SweepResult s2 = sweep_p(cfg, r2, 8);
    REQUIRE(s1.curve.size() == s2.curve.size());
    for (size_t g = 0; g < s1.curve.size(); ++g) CHECK(s1.curve[g].hits == s2.curve[g].hits);
    CHECK(s1.pc_hat == s2.pc_hat);
    CHECK(s1.pc_lo == s2.pc_lo);
    CHECK(s1.pc_hi == s2.pc_hi);
}

TEST_CASE("sweep on the homogeneous lattice brackets the critical point") {
    ExperimentConfig cfg = parse_config(
        "spec = det:1\n"
        "p_grid = 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65\n"
        "box = 32\n"
        "replicas = 300\n");
    RngStream rng(2024, 1);
    SweepResult res = sweep_p(cfg, rng, 4);
    CHECK(res.pc_bracketed);
    CHECK(res.pc_hat > 0.42);
    CHECK(res.pc_hat < 0.58);
    CHECK(res.pc_lo <= res.pc_hat);
    CHECK(res.pc_hi >= res.pc_hat);
    CHECK(res.pc_hi - res.pc_lo < 0.2);
}

TEST_CASE("stretched gaps only hurt: geometric curve sits below the unit-gap curve") {
    // Same master stream, so both runs share the per-replica uniform fields.
    // Geometric gaps are >= 1, every horizontal edge probability is <= the
    // unit-gap one, and the open sets are pointwise dominated.
    ExperimentConfig unit = parse_config(
        "spec = det:1\np_grid = 0.4, 0.5, 0.6\nbox = 24\nreplicas = 120\n");
    ExperimentConfig geo = parse_config(
        "spec = geometric:0.5\np_grid = 0.4, 0.5, 0.6\nbox = 24\nreplicas = 120\n");
    RngStream r1(77, 0), r2(77, 0);
    SweepResult su = sweep_p(unit, r1, 4);
    SweepResult sg = sweep_p(geo, r2, 4);
    for (size_t g = 0; g < su.curve.size(); ++g) CHECK(sg.curve[g].hits <= su.curve[g].hits);
}

TEST_CASE("heavy-tail plan derives the tail exponent and validates its input") {
    HeavyTailPlan plan = heavy_tail_plan(0.5, {2, 4});
    CHECK(plan.epsilon_tail == doctest::Approx(0.5));
    CHECK(heavy_tail_plan(1.0 / 3.0, {1}).epsilon_tail == doctest::Approx(1.0));
    CHECK_THROWS_AS(heavy_tail_plan(1.0, {1}), SpecError);
    CHECK_THROWS_AS(heavy_tail_plan(0.0, {1}), SpecError);
    CHECK_THROWS_AS(heavy_tail_plan(0.5, {}), SpecError);
    CHECK_THROWS_AS(heavy_tail_plan(0.5, {2, 2}), SpecError);
    CHECK_THROWS_AS(heavy_tail_plan(0.5, {0, 2}), SpecError);
}

TEST_CASE("heavy-tail closed-form bounds match hand-computed values") {
    // row_count(2) = ceil(exp(2^1.5)) = ceil(16.918...) = 17
    CHECK(heavy_tail_row_count(2, 0.5) == 17.0);
    CHECK(heavy_tail_row_count(4, 0.5) == 2981.0);  // ceil(exp(8))

    // b_h(2) = 17 * 0.5^(2^2) = 1.0625: vacuous at this tiny scale
    CHECK(heavy_tail_bound_h(2, 0.5, 0.5) == doctest::Approx(1.0625));
    // b_h(4) = 2981 * 0.5^16 = 0.04548...: informative
    CHECK(heavy_tail_bound_h(4, 0.5, 0.5) == doctest::Approx(2981.0 / 65536.0));
    // b_v(3) at p = 0.9: exp(-181 * 0.1^3)
    CHECK(heavy_tail_row_count(3, 0.5) == 181.0);
    CHECK(heavy_tail_bound_v(3, 0.5, 0.9) == doctest::Approx(std::exp(-0.181)));

    CHECK(heavy_tail_bound_h(2, 0.5, 0.0) == 0.0);
    CHECK(heavy_tail_bound_v(2, 0.5, 1.0) == 1.0);
    CHECK(heavy_tail_bound_h(2, 0.5, 1.0) == 17.0);  // vacuous, never NaN
    // giant index: log-space evaluation keeps the value finite
    CHECK(heavy_tail_bound_h(1e6, 0.5, 0.5) == 0.0);
    CHECK(heavy_tail_bound_v(1e6, 0.5, 0.5) == 0.0);
}

TEST_CASE("heavy-tail experiment refuses laws with a finite eta-th moment") {
    HeavyTailPlan plan = heavy_tail_plan(0.5, {2});
    RngStream rng(1, 2);
    CHECK_THROWS_AS(heavy_tail_experiment(InterarrivalSpec::geometric(0.5), plan, 0.5, 100, {},
                                          100, rng),
                    SpecError);
    CHECK_THROWS_AS(heavy_tail_experiment(InterarrivalSpec::deterministic(1), plan, 0.5, 100, {},
                                          100, rng),
                    SpecError);
    // zeta(1.5) has E(xi^0.5) = infinity, so the gate opens
    CHECK(!check_moment(InterarrivalSpec::zeta(1.5), 0.5).finite);
}

TEST_CASE("heavy-tail experiment finds huge gaps and honors its bounds") {
    InterarrivalSpec spec = InterarrivalSpec::zeta(1.5);
    HeavyTailPlan plan = heavy_tail_plan(0.5, {1, 2});
    RngStream rng(314, 0);
    HeavyTailResult res =
        heavy_tail_experiment(spec, plan, 0.5, 2000, {2, 4, 8}, 500, rng, 3000, 100000);
    REQUIRE(res.rows.size() == 2);

    int64_t prev = 0;
    for (const auto& row : res.rows) {
        CHECK(row.i > prev);
        prev = row.i;
        // found index satisfies the defining tail inequality
        CHECK(row.gap > std::pow(double(row.i), 2.0));
        CHECK(row.row_count == heavy_tail_row_count(double(row.i), 0.5));
        if (row.feasible) {
            CHECK(row.n == 2000);
            CHECK(row.ch_hits >= 0);
            CHECK(row.ch_hits <= row.n);
            CHECK(row.ch_hi <= 1.0);
            if (!row.b_h_vacuous) CHECK(row.ch_hi <= row.b_h);
            if (!row.b_v_vacuous) CHECK(row.cv_hi <= row.b_v);
        }
    }
    CHECK(res.rows[0].i >= 1);
    CHECK(res.rows[1].i >= 2);
    CHECK(res.bounds_pass);

    // decay curve: monotone per construction, non-increasing in aggregate
    REQUIRE(res.decay_hat.size() == 3);
    CHECK(res.monotone);
    CHECK(res.decay_hits[1] <= res.decay_hits[0]);
    CHECK(res.decay_hits[2] <= res.decay_hits[1]);

    // same seed, same numbers
    RngStream rng2(314, 0);
    HeavyTailResult res2 =
        heavy_tail_experiment(spec, plan, 0.5, 2000, {2, 4, 8}, 500, rng2, 3000, 100000);
    for (size_t t = 0; t < res.rows.size(); ++t) {
        CHECK(res.rows[t].i == res2.rows[t].i);
        CHECK(res.rows[t].ch_hits == res2.rows[t].ch_hits);
        CHECK(res.rows[t].cv_hits == res2.rows[t].cv_hits);
    }
    CHECK(res.decay_hits == res2.decay_hits);
}

TEST_CASE("heavy-tail experiment reports an infeasible row bound-only") {
    InterarrivalSpec spec = InterarrivalSpec::zeta(1.5);
    HeavyTailPlan plan = heavy_tail_plan(0.5, {1});
    RngStream rng(314, 0);
    // budget of 4 edges rules out even the smallest box
    HeavyTailResult res = heavy_tail_experiment(spec, plan, 0.5, 50, {}, 50, rng, 3000, 4);
    REQUIRE(res.rows.size() == 1);
    CHECK(!res.rows[0].feasible);
    CHECK(res.rows[0].n == 0);
    CHECK(res.rows[0].b_v > 0.0);  // the bound is still reported
    CHECK(res.rows[0].h_bound_pass);
    CHECK(res.rows[0].v_bound_pass);
}

TEST_CASE("heavy-tail experiment names the plan index it cannot place") {
    InterarrivalSpec spec = InterarrivalSpec::zeta(1.5);
    // gap > i^2 for some i in [600, 640]: each index qualifies with chance
    // well under 1/250, so this seed (checked) has no hit in the window
    HeavyTailPlan plan = heavy_tail_plan(0.5, {600});
    RngStream rng(11, 5);
    try {
        heavy_tail_experiment(spec, plan, 0.5, 10, {}, 10, rng, 640, 100);
        FAIL("expected a horizon failure");
    } catch (const SpecError& e) {
        CHECK(std::string(e.what()).find("within the window horizon") != std::string::npos);
        CHECK(std::string(e.what()).find("600") != std::string::npos);
    }
}

TEST_CASE("certificate experiment: tiny ladder agrees with its product bound") {
    ScaleParams params = params_relaxed(1.0, 0.5, 1.2, 0.5, 0.9);
    ScaleSystem sys = scales_from_explicit(params, 2, {2, 2}, HeightMode::desk, 1);
    InterarrivalSpec spec = InterarrivalSpec::deterministic(1);
    RngStream rng(5150, 0);
    CertificateExperiment ex =
        percolation_certificate_experiment(spec, sys, 0.95, 0, 1, 2, 400, 800, rng, 2);
    CHECK(ex.n == 800);
    CHECK(ex.violations == 0);  // certificate => connectivity, every trial
    CHECK(ex.conn_hits >= ex.cert_hits);
    CHECK(ex.bound > 0.0);
    CHECK(ex.bound_conservative <= ex.bound);
    CHECK(ex.fkg_consistent);
    REQUIRE(ex.qk.size() == 2);
    for (size_t k = 0; k < ex.qk.size(); ++k) {
        CHECK(ex.qk[k] >= 0.0);
        CHECK(ex.qk[k] <= ex.qk_hi[k]);
    }
}

TEST_CASE("certificate experiment endpoints: p = 1 certain, p = 0 impossible") {
    ScaleParams params = params_relaxed(1.0, 0.5, 1.2, 0.5, 0.9);
    ScaleSystem sys = scales_from_explicit(params, 2, {2, 2}, HeightMode::desk, 1);
    InterarrivalSpec spec = InterarrivalSpec::deterministic(1);

    RngStream r1(8, 0);
    CertificateExperiment hi =
        percolation_certificate_experiment(spec, sys, 1.0, 0, 1, 1, 50, 200, r1);
    CHECK(hi.cert_hits == 200);
    CHECK(hi.conn_hits == 200);
    CHECK(hi.violations == 0);
    CHECK(hi.fkg_consistent);

    RngStream r0(9, 0);
    CertificateExperiment lo =
        percolation_certificate_experiment(spec, sys, 0.0, 0, 1, 1, 50, 200, r0);
    CHECK(lo.cert_hits == 0);
    CHECK(lo.bound == 0.0);
    CHECK(lo.violations == 0);
    CHECK(lo.fkg_consistent);
}

TEST_CASE("certificate experiment is thread-count invariant and validates input") {
    ScaleParams params = params_relaxed(1.0, 0.5, 1.2, 0.5, 0.9);
    ScaleSystem sys = scales_from_explicit(params, 2, {2, 2}, HeightMode::desk, 1);
    InterarrivalSpec spec = InterarrivalSpec::geometric(0.5);

    RngStream r1(13, 4), r2(13, 4);
    CertificateExperiment a =
        percolation_certificate_experiment(spec, sys, 0.9, 0, 1, 2, 100, 300, r1, 1);
    CertificateExperiment b =
        percolation_certificate_experiment(spec, sys, 0.9, 0, 1, 2, 100, 300, r2, 8);
    CHECK(a.cert_hits == b.cert_hits);
    CHECK(a.conn_hits == b.conn_hits);
    CHECK(a.qk == b.qk);
    CHECK(a.bound == b.bound);

    RngStream r3(1, 1);
    // K + 1 must stay inside the ladder
    CHECK_THROWS_AS(percolation_certificate_experiment(spec, sys, 0.9, 0, 2, 1, 10, 10, r3),
                    SpecError);
    CHECK_THROWS_AS(percolation_certificate_experiment(spec, sys, 0.9, 1, 0, 1, 10, 10, r3),
                    SpecError);
    ScaleSystem tall = scales_from_explicit(params, 2, {2, 2}, HeightMode::exact_log, 1);
    CHECK_THROWS_AS(percolation_certificate_experiment(spec, tall, 0.9, 0, 1, 1, 10, 10, r3),
                    SpecError);
}

TEST_CASE("audit: geometric gaps at a small scale match the stationary tail oracle") {
    // P(block 0 bad) = P(stationary delay > L0) = (1/2)^(L0+1) = 1/16 at L0 = 3
    ScaleParams params = params_relaxed(1.0, 0.5, 1.2, 0.5, 0.9);
    ScaleSystem sys = scales_from_explicit(params, 3, {3, 2}, HeightMode::desk, 1);
    InterarrivalSpec spec = InterarrivalSpec::geometric(0.5);
    RngStream rng(271, 0);
    DecouplingPkAudit audit = audit_decoupling_and_pk(spec, sys, 1, 20000, rng);

    CHECK(audit.p0_exact == doctest::Approx(0.0625).epsilon(1e-9));
    CHECK(audit.p0_matches_exact);
    CHECK(audit.p0_bound_pass);  // 1/16 <= 3^{-1/2}
    REQUIRE(audit.pk.size() == 2);
    CHECK(audit.pk[0].p_hat == doctest::Approx(0.0625).epsilon(0.25));
    REQUIRE(audit.recursion.size() == 1);
    CHECK(audit.recursion[0].closed_form_pass);
    CHECK(audit.recursion[0].closed_form_bound ==
          doctest::Approx((1.0 + std::max(audit.c1.c_fit, 0.0)) * std::pow(3.0, -0.6)));
    CHECK(audit.all_pass);
    CHECK(audit.c1.c_fit >= 0.0);
    CHECK(audit.c1.c_paper > 0.0);
    CHECK(audit.c1.exact_gaps);  // geometric covariances are closed-form
}

TEST_CASE("audit: a law with bounded delay makes block 0 bad with probability zero") {
    InterarrivalSpec spec = InterarrivalSpec::finite_pmf({{1, 0.5}, {2, 0.5}});
    ScaleParams params = params_relaxed(1.0, 0.5, 1.2, 0.5, 0.9);
    ScaleSystem sys = scales_from_explicit(params, 4, {3}, HeightMode::desk, 1);
    RngStream rng(99, 0);
    DecouplingPkAudit audit = audit_decoupling_and_pk(spec, sys, 0, 5000, rng);
    CHECK(audit.p0_exact == 0.0);  // stationary delay is at most 1
    CHECK(audit.pk[0].n_bad == 0);
    CHECK(audit.p0_matches_exact);
    CHECK(audit.all_pass);
}

TEST_CASE("run: empty task list persists the config hash and nothing else") {
    ExperimentConfig cfg = parse_config("seed = 5\nbox = 8\n");
    RunRecord rec = run(cfg);
    REQUIRE(rec.lines.size() == 1);
    json j = json::parse(rec.lines[0]);
    CHECK(j["kind"] == "config");
    CHECK(j["hash"].get<std::string>().size() == 16);
    CHECK(rec.config_hash == cfg.config_hash());
    CHECK(rec.reused == 0);
    CHECK(!rec.started_at.empty());
    CHECK(!rec.finished_at.empty());
}

TEST_CASE("run: reruns are byte-identical and thread-count invariant") {
    ExperimentConfig cfg = parse_config(
        "spec = det:1\n"
        "p_grid = 0.4, 0.5, 0.6\n"
        "box = 8\n"
        "replicas = 40\n"
        "seed = 12\n"
        "tasks = sweep\n");
    RunRecord a = run(cfg, 1);
    RunRecord b = run(cfg, 1);
    RunRecord c = run(cfg, 8);
    CHECK(a.lines == b.lines);
    CHECK(a.lines == c.lines);
    REQUIRE(a.lines.size() == 2);
    json task = json::parse(a.lines[1]);
    CHECK(task["task"] == "sweep");
    CHECK(task["seq"] == 0);
    CHECK(task["seed"] == 12);
    CHECK(task["result"]["curve"].size() == 3);
}

TEST_CASE("run: interrupted and resumed equals uninterrupted") {
    std::string out_a = unique_tmp("resume");
    std::string out_b = unique_tmp("reference");
    std::string base =
        "spec = det:1\n"
        "p_grid = 0.4, 0.6\n"
        "box = 8\n"
        "replicas = 30\n"
        "seed = 21\n"
        "tasks = sweep, sweep\n";
    ExperimentConfig cfg_a = parse_config(base + "out = " + out_a + "\n");
    ExperimentConfig cfg_b = parse_config(base + "out = " + out_b + "\n");

    RunRecord full = run(cfg_b);
    REQUIRE(full.lines.size() == 3);
    std::string reference = read_file(out_b);

    // run A fully, then cut the file back to header + first task
    run(cfg_a);
    {
        std::ifstream in(out_a);
        std::string l0, l1;
        std::getline(in, l0);
        std::getline(in, l1);
        in.close();
        std::ofstream trunc(out_a, std::ios::trunc);
        trunc << l0 << "\n" << l1 << "\n";
    }
    RunRecord resumed = run(cfg_a);
    CHECK(resumed.reused == 2);  // header and the surviving task

    // out differs between the configs, so hashes and persisted lines differ
    // there; compare everything past the hash field via the parsed results.
    std::string resumed_text = read_file(out_a);
    json ra0 = json::parse(split(resumed_text, '\n')[1]);
    json rb0 = json::parse(split(reference, '\n')[1]);
    CHECK(ra0["result"] == rb0["result"]);
    json ra1 = json::parse(split(resumed_text, '\n')[2]);
    json rb1 = json::parse(split(reference, '\n')[2]);
    CHECK(ra1["result"] == rb1["result"]);
    CHECK(split(resumed_text, '\n').size() == split(reference, '\n').size());

    // a third run reuses everything and appends nothing
    RunRecord again = run(cfg_a);
    CHECK(again.reused == 3);
    CHECK(read_file(out_a) == resumed_text);
    std::remove(out_a.c_str());
    std::remove(out_b.c_str());
}

TEST_CASE("run: records for different configs share one file without mixing") {
    std::string out = unique_tmp("shared");
    std::string common =
        "spec = det:1\np_grid = 0.4, 0.6\nbox = 8\nreplicas = 20\ntasks = sweep\nout = " + out +
        "\n";
    ExperimentConfig cfg1 = parse_config(common + "seed = 1\n");
    ExperimentConfig cfg2 = parse_config(common + "seed = 2\n");
    RunRecord r1 = run(cfg1);
    RunRecord r2 = run(cfg2);
    CHECK(r1.config_hash != r2.config_hash);
    CHECK(split(trim(read_file(out)), '\n').size() == 4);

    // each rerun finds only its own lines
    RunRecord r1_again = run(cfg1);
    CHECK(r1_again.reused == 2);
    CHECK(r1_again.lines == r1.lines);
    CHECK(split(trim(read_file(out)), '\n').size() == 4);
    std::remove(out.c_str());
}

TEST_CASE("run: certificate task goes through the config surface") {
    ExperimentConfig cfg = parse_config(
        "spec = det:1\n"
        "seed = 3\n"
        "tasks = certificate\n"
        "waive_validation = 1\n"
        "L0 = 2\n"
        "desk_h = 1\n"
        "cert_ratios = 2, 2\n"
        "cert_p = 0.95\n"
        "cert_envs = 1\n"
        "cert_cfgs = 100\n"
        "cert_trials = 200\n");
    RunRecord rec = run(cfg, 2);
    REQUIRE(rec.lines.size() == 2);
    json task = json::parse(rec.lines[1]);
    CHECK(task["result"]["violations"] == 0);
    CHECK(task["result"]["n"] == 200);
    CHECK(task["result"]["fkg_consistent"] == true);
}

TEST_CASE("run: audit without a waiver demands a validated ladder start") {
    ExperimentConfig cfg = parse_config(
        "spec = geometric:0.5\n"
        "seed = 4\n"
        "tasks = audit\n"
        "L0 = 4\n"
        "audit_kmax = 0\n"
        "audit_samples = 200\n");
    CHECK_THROWS_AS(run(cfg), SpecError);  // L0 = 4 fails the admissibility checks
}
