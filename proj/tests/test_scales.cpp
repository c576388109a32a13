#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "stretchperc/environment.hpp"
#include "stretchperc/interarrival.hpp"
#include "stretchperc/scales.hpp"

using namespace stretchperc;

TEST_CASE("parameter validation accepts a consistent set") {
    ScaleParams p = validate_params(1.0, 0.5, 1.1, 0.95, 0.95);
    CHECK(p.strict);
    CHECK(p.c2 == doctest::Approx(0.25));
    // beta interval is (gamma*mu - gamma + 1, 1) = (0.945, 1)
    CHECK(p.gamma * p.mu - p.gamma + 1 == doctest::Approx(0.945));
    CHECK(p.violations.empty());

    // closed upper endpoint: alpha = epsilon/2 is allowed
    CHECK_NOTHROW(validate_params(0.8, 0.4, 1.1, 0.95, 0.95));
}

TEST_CASE("parameter validation rejects gamma outside its interval") {
    // 1 + alpha/(alpha+2) = 1.2 at alpha = 0.5
    CHECK_THROWS_AS(validate_params(1.0, 0.5, 1.3, 0.95, 0.95), SpecError);
    ScaleParams r = params_relaxed(1.0, 0.5, 1.3, 0.95, 0.95);
    CHECK(!r.strict);
    bool mentions_gamma = false;
    for (const auto& v : r.violations)
        if (v.find("gamma") != std::string::npos) mentions_gamma = true;
    CHECK(mentions_gamma);
}

TEST_CASE("every violated constraint is reported, not just the first") {
    ScaleParams r = params_relaxed(1.0, 0.6, 1.3, 0.5, 0.2);
    CHECK(r.violations.size() >= 3);  // alpha, gamma, mu are all out
    CHECK(!r.strict);
}

TEST_CASE("relaxed parameters still require gamma in (1,2)") {
    CHECK_THROWS_AS(params_relaxed(1.0, 0.5, 2.5, 0.9, 0.95), SpecError);
    CHECK_THROWS_AS(params_relaxed(1.0, 0.5, 1.0, 0.9, 0.95), SpecError);
}

TEST_CASE("feasible region description mentions each parameter") {
    std::string d = describe_feasible_region(1.0);
    CHECK(d.find("alpha") != std::string::npos);
    CHECK(d.find("0.5") != std::string::npos);
    CHECK(d.find("gamma") != std::string::npos);
    CHECK(d.find("beta") != std::string::npos);
}

TEST_CASE("L0 growth condition at gamma=1.1 vs gamma=1.2") {
    ScaleParams p11 = validate_params(1.0, 0.5, 1.1, 0.95, 0.95);
    L0Check c = validate_L0(p11, 300, 1.0, 0.0);
    CHECK(!c.growth);  // 300^0.1 ~ 1.77 < 3
    CHECK(!c.pass());

    ScaleParams p12 = params_relaxed(1.0, 0.5, 1.2, 0.9, 0.95);
    L0Check c2 = validate_L0(p12, 300, 1.0, 0.0);
    CHECK(c2.growth);  // 300^0.2 ~ 3.13 >= 3
}

TEST_CASE("minimal L0 for a deterministic environment is 3^(1/(gamma-1))") {
    // gamma - 1 = 0.10000000000000009 in double, slightly above 1/10, so the
    // threshold stays at 3^10 = 59049.
    ScaleParams p = validate_params(1.0, 0.5, 1.1, 0.95, 0.95);
    L0Check c = validate_L0(p, 59049, 0.0, 0.0);
    CHECK(c.pass());
    CHECK(c.minimal_L0 == 59049);
    L0Check below = validate_L0(p, 59048, 0.0, 0.0);
    CHECK(!below.growth);
}

TEST_CASE("minimal L0 for the geometric(1/2) audit set") {
    // gamma - 1 = 0.19999999999999996 sits just below 1/5, so 243^(gamma-1)
    // falls a hair short of 3 and the threshold moves up to 244.
    ScaleParams p = params_relaxed(1.0, 0.5, 1.2, 0.9, 0.95);
    CHECK(p.c2 == doctest::Approx(0.0));
    // geometric(1/2): E(rho) = 1 exactly, and decoupling is exact so c1 = 0
    L0Check c = validate_L0(p, 244, 1.0, 0.0);
    CHECK(c.growth);
    CHECK(c.moment);
    CHECK(c.c1_margin);  // L0^0 = 1 >= c1 + 1 = 1
    CHECK(c.pass());
    CHECK(c.minimal_L0 == 244);
    CHECK(!validate_L0(p, 243, 1.0, 0.0).growth);
}

TEST_CASE("validate_L0 rejects garbage inputs") {
    ScaleParams p = validate_params(1.0, 0.5, 1.1, 0.95, 0.95);
    CHECK_THROWS_AS(validate_L0(p, 300, std::nan(""), 0.0), SpecError);
    CHECK_THROWS_AS(validate_L0(p, 300, 1.0, -2.0), SpecError);
    CHECK_THROWS_AS(validate_L0(p, 1, 1.0, 0.0), SpecError);
}

TEST_CASE("certified floor of powers") {
    // dyadic exponents take the exact integer path
    CHECK(floor_pow_certified(16, 0.25) == 2);
    CHECK(floor_pow_certified(17, 0.5) == 4);
    CHECK(floor_pow_certified(10, 1.5) == 31);  // floor(sqrt(1000))
    BigInt g = boost::multiprecision::pow(BigInt(10), 100);
    CHECK(floor_pow_certified(g, 0.5) == boost::multiprecision::pow(BigInt(10), 50));
    CHECK(floor_pow_certified(g, 0.25) == boost::multiprecision::pow(BigInt(10), 25));

    // non-dyadic exponents use the certified 100-digit path
    CHECK(floor_pow_certified(300, 0.2) == 3);
    CHECK(floor_pow_certified(900, 0.2) == 3);
    CHECK(floor_pow_certified(2700, 0.2) == 4);

    // results past 1e80 escalate to the wide tier
    BigInt big = boost::multiprecision::pow(BigInt(10), 150);
    BigInt r = floor_pow_certified(big, 0.7);
    BigInt hi = boost::multiprecision::pow(BigInt(10), 105);
    CHECK(r <= hi);
    CHECK(r > hi - boost::multiprecision::pow(BigInt(10), 92));

    // and refuse honestly when even that is not enough
    BigInt huge = boost::multiprecision::pow(BigInt(10), 2000);
    CHECK_THROWS_AS(floor_pow_certified(huge, 0.7), SpecError);

    CHECK_THROWS_AS(floor_pow_certified(0, 0.5), SpecError);
    CHECK_THROWS_AS(floor_pow_certified(10, -1.0), SpecError);
}

TEST_CASE("scale ladder for L0=300, gamma=1.2") {
    ScaleParams p = params_relaxed(1.0, 0.5, 1.2, 0.9, 0.95);
    ScaleSystem sys = build_scales(p, 300, 2);
    REQUIRE(sys.kmax() == 2);
    CHECK(sys.L_int(0) == 300);
    CHECK(sys.L_int(1) == 900);   // 300 * floor(300^0.2) = 300 * 3
    CHECK(sys.L_int(2) == 2700);  // 900 * floor(900^0.2) = 900 * 3
    CHECK(sys.ratio_int(0) == 3);
    CHECK(sys.ratio_int(1) == 3);

    ScaleSystem one = build_scales(p, 300, 0);
    CHECK(one.kmax() == 0);
    CHECK(one.L_int(0) == 300);
}

TEST_CASE("block index intervals") {
    ScaleParams p = params_relaxed(1.0, 0.5, 1.2, 0.9, 0.95);
    ScaleSystem sys = build_scales(p, 300, 2);
    auto [lo, hi] = sys.block_indices(1, 2);
    CHECK(lo == 6);
    CHECK(hi == 8);
    auto [lo0, hi0] = sys.block_indices(1, 0);
    CHECK(lo0 == 0);
    CHECK(hi0 == 2);
    auto [lo2, hi2] = sys.block_indices(2, 1);
    CHECK(lo2 == 3);
    CHECK(hi2 == 5);
    CHECK_THROWS_AS(sys.block_indices(0, 0), SpecError);
}

TEST_CASE("ladder recursion and sandwich hold for a faster-growing gamma") {
    ScaleParams p = params_relaxed(1.0, 0.5, 1.9, 0.9, 0.95);
    ScaleSystem sys = build_scales(p, 5, 6);
    for (int k = 1; k <= 6; ++k)
        CHECK(sys.L[(size_t)k] == sys.L[(size_t)k - 1] * sys.ratio[(size_t)k - 1]);
    // children tile the parent: widths multiply exactly
    for (int k = 1; k <= 6; ++k) {
        auto [lo, hi] = sys.block_indices(k, 0);
        CHECK(hi - lo + 1 == sys.ratio_int(k - 1));
        CHECK(sys.ratio_int(k - 1) >= 3);
    }
}

TEST_CASE("ladder refuses L0 below the growth threshold") {
    ScaleParams p = params_relaxed(1.0, 0.5, 1.2, 0.9, 0.95);
    CHECK_THROWS_AS(build_scales(p, 100, 2), SpecError);  // 100^0.2 ~ 2.5 < 3
}

TEST_CASE("desk heights are h*L and exact-log heights match the recursion") {
    ScaleParams p = params_relaxed(1.0, 0.5, 1.9, 0.9, 0.95);
    ScaleSystem desk = build_scales(p, 5, 2, HeightMode::desk, 4);
    CHECK(desk.H_int(0) == 20);
    CHECK(desk.H_int(1) == 80);   // L1 = 20
    CHECK(desk.H_int(2) == 1120); // L2 = 280
    CHECK(desk.log10_H(0) == doctest::Approx(std::log10(20.0)));

    ScaleSystem lg = build_scales(p, 5, 2, HeightMode::exact_log, 4);
    CHECK_THROWS_AS(lg.H_int(0), SpecError);
    double h0 = (double)lg.Hlog[0];
    CHECK(h0 == doctest::Approx(std::log(100.0)));
    double term1 = std::log(std::ceil(std::exp(std::pow(20.0, 0.9))));
    CHECK((double)lg.Hlog[1] == doctest::Approx(std::log(2.0) + term1 + h0).epsilon(1e-12));
    double term2 = std::log(std::ceil(std::exp(std::pow(280.0, 0.9))));
    CHECK((double)lg.Hlog[2] ==
          doctest::Approx(std::log(2.0) + term2 + (double)lg.Hlog[1]).epsilon(1e-12));
}

TEST_CASE("exact-log heights blow past any simulable size at a validated-scale L0") {
    ScaleParams p = params_relaxed(1.0, 0.5, 1.2, 0.95, 0.99);
    ScaleSystem sys = build_scales(p, 300, 1, HeightMode::exact_log);
    // H_1 = 2*ceil(exp(900^0.95))*100, about 10^280
    CHECK(sys.log10_H(1) > 250);
    CHECK(sys.log10_H(1) < 320);
}

namespace {
ScaleSystem tiny_system(int kmax) {
    // L0 = 4 with ratio 3 per level: 4^(0.7925) = 3.00008
    ScaleParams p = params_relaxed(1.0, 0.5, 1.7925, 0.9, 0.95);
    return build_scales(p, 4, kmax);
}
}  // namespace

TEST_CASE("labeling hand examples at one level") {
    ScaleSystem sys = tiny_system(1);
    REQUIRE(sys.L_int(1) == 12);

    // two adjacent bad children: (bad, bad, good) -> parent good
    EnvironmentWindow bbg = environment_from_gaps(9.0, {3.0});
    BlockLabelGrid g1 = label_blocks(bbg, sys, 1);
    REQUIRE(g1.blocks_at(0) == 3);
    CHECK(g1.is_bad(0, 0));
    CHECK(g1.is_bad(0, 1));
    CHECK(!g1.is_bad(0, 2));
    CHECK(!g1.is_bad(1, 0));

    // bad children two apart: (bad, good, bad) -> parent bad
    EnvironmentWindow bgb = environment_from_gaps(5.0, {8.0});
    BlockLabelGrid g2 = label_blocks(bgb, sys, 1, 12.0);
    REQUIRE(g2.blocks_at(0) == 3);
    CHECK(g2.is_bad(0, 0));
    CHECK(!g2.is_bad(0, 1));
    CHECK(g2.is_bad(0, 2));
    CHECK(g2.is_bad(1, 0));

    // column exactly on the shared endpoint 4 rescues both blocks [0,4] and [4,8]
    EnvironmentWindow edge = environment_from_gaps(4.0, {9.0});
    BlockLabelGrid g3 = label_blocks(edge, sys, 1, 12.0);
    CHECK(!g3.is_bad(0, 0));
    CHECK(!g3.is_bad(0, 1));
    CHECK(g3.is_bad(0, 2));
    CHECK(!g3.is_bad(1, 0));
}

TEST_CASE("deterministic(1) environment is all good at every scale") {
    ScaleSystem sys = tiny_system(2);
    int64_t horizon = sys.L_int(2);  // 84
    RngStream rng(7, 0);
    EnvironmentWindow env =
        realize_to_horizon(InterarrivalSpec::deterministic(1), DelaySpec::dirac(0), (double)horizon, rng);
    BlockLabelGrid grid = label_blocks(env, sys, 2, (double)horizon);
    for (int k = 0; k <= 2; ++k)
        for (int64_t j = 0; j < grid.blocks_at(k); ++j) CHECK(!grid.is_bad(k, j));
}

TEST_CASE("labeling refuses a window shorter than one top block") {
    ScaleSystem sys = tiny_system(2);
    EnvironmentWindow env = environment_from_gaps(0.0, {10.0});
    CHECK_THROWS_AS(label_blocks(env, sys, 2), SpecError);
    CHECK_THROWS_AS(label_blocks(env, sys, 0, 50.0), SpecError);  // beyond the window
}

TEST_CASE("rle dump names the bad runs") {
    ScaleSystem sys = tiny_system(1);
    EnvironmentWindow bgb = environment_from_gaps(5.0, {8.0});
    BlockLabelGrid g = label_blocks(bgb, sys, 1, 12.0);
    std::string dump = g.rle_dump();
    CHECK(dump.find("scale 0: bad[0,1) bad[2,3)") != std::string::npos);
    CHECK(dump.find("scale 1: bad[0,1)") != std::string::npos);

    EnvironmentWindow bbg = environment_from_gaps(9.0, {3.0});
    std::string dump2 = label_blocks(bbg, sys, 1).rle_dump();
    CHECK(dump2.find("scale 1: all-good") != std::string::npos);
}

TEST_CASE("random grids: structure, monotonicity under point insertion") {
    ScaleSystem sys = tiny_system(2);
    int64_t horizon = sys.L_int(2);
    RngStream rng(101, 0);
    InterarrivalSpec specs[2] = {InterarrivalSpec::geometric(0.3), InterarrivalSpec::zeta(1.5)};
    int checked = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const InterarrivalSpec& spec = specs[trial % 2];
        EnvironmentWindow env =
            realize_to_horizon(spec, DelaySpec::dirac(0), (double)horizon, rng);
        BlockLabelGrid grid = label_blocks(env, sys, 2, (double)horizon);
        auto bad_pair = find_good_block_violation(grid, sys);
        CHECK(bad_pair.first == -1);

        // insert one new column; labels may only flip bad -> good
        int64_t v = (int64_t)rng.next_u64() % horizon;
        if (env.has_column_at((double)v)) continue;
        std::set<double> cols(env.columns.begin(), env.columns.end());
        cols.insert((double)v);
        std::vector<double> sorted(cols.begin(), cols.end());
        std::vector<double> gaps;
        for (size_t i = 1; i < sorted.size(); ++i) gaps.push_back(sorted[i] - sorted[i - 1]);
        EnvironmentWindow env2 = environment_from_gaps(sorted[0], gaps);
        BlockLabelGrid grid2 = label_blocks(env2, sys, 2, (double)horizon);
        for (int k = 0; k <= 2; ++k) {
            REQUIRE(grid2.blocks_at(k) == grid.blocks_at(k));
            for (int64_t j = 0; j < grid.blocks_at(k); ++j)
                CHECK(grid2.is_bad(k, j) <= grid.is_bad(k, j));
        }
        auto bad_pair2 = find_good_block_violation(grid2, sys);
        CHECK(bad_pair2.first == -1);
        ++checked;
    }
    CHECK(checked > 250);
}

TEST_CASE("p0 estimate matches the geometric tail") {
    // block 0 is good iff a column lands in [0, L0], so p_0 = P(rho > L0)
    ScaleParams p = params_relaxed(1.0, 0.5, 1.4, 0.75, 0.9);
    ScaleSystem sys = build_scales(p, 20, 1);
    double q = 0.05;
    double p0 = std::pow(1 - q, 21);  // about 0.3406
    RngStream rng(2024, 0);
    PkEstimate est = estimate_pk(InterarrivalSpec::geometric(q), sys, 0, 20000, rng);
    CHECK(est.n_samples == 20000);
    double sigma = std::sqrt(p0 * (1 - p0) / 20000.0);
    CHECK(std::abs(est.p_hat - p0) <= 3.2 * sigma);
    CHECK(est.ci_lo <= p0);
    CHECK(est.ci_hi >= p0);
    CHECK(!est.indistinguishable);
}

TEST_CASE("p0 for geometric(1/2) at L0=20 sits far under the power-law bound") {
    ScaleParams p = params_relaxed(1.0, 0.5, 1.4, 0.75, 0.9);
    ScaleSystem sys = build_scales(p, 20, 0);
    double p0_exact = std::pow(0.5, 21);
    CHECK(p0_exact <= std::pow(20.0, -0.5));
    RngStream rng(5, 0);
    PkEstimate est = estimate_pk(InterarrivalSpec::geometric(0.5), sys, 0, 100000, rng);
    CHECK(est.n_bad == 0);  // p0 = 2^-21, invisible at this sample size
    CHECK(est.indistinguishable);
    CHECK(est.bound_pass);  // upper CI ~ 9e-5 <= 20^-0.5
    CHECK(est.log10_bound == doctest::Approx(-0.5 * std::log10(20.0)));
}

TEST_CASE("deterministic(1) never produces a bad block") {
    ScaleParams p = params_relaxed(1.0, 0.5, 1.7925, 0.9, 0.95);
    ScaleSystem sys = build_scales(p, 4, 1);
    RngStream rng(9, 0);
    PkEstimate e0 = estimate_pk(InterarrivalSpec::deterministic(1), sys, 0, 500, rng);
    PkEstimate e1 = estimate_pk(InterarrivalSpec::deterministic(1), sys, 1, 500, rng);
    CHECK(e0.n_bad == 0);
    CHECK(e1.n_bad == 0);
}

TEST_CASE("recursion comparator arithmetic") {
    ScaleParams p = params_relaxed(1.0, 0.5, 1.4, 0.75, 0.9);
    ScaleSystem sys = build_scales(p, 20, 1);
    PkEstimate a;
    a.k = 0;
    a.p_hat = 0.1;
    PkEstimate b;
    b.k = 1;
    b.p_hat = 0.001;
    PkRecursionCheck chk = pk_recursion_check(sys, 0, a, b, 0.5);
    double expect = std::pow(20.0, 2 * (p.gamma - 1)) * (0.01 + 0.5 * std::pow(20.0, -1.0));
    CHECK(chk.rhs == doctest::Approx(expect));
    CHECK(chk.lhs == doctest::Approx(0.001));
    CHECK(chk.holds);
    CHECK_THROWS_AS(pk_recursion_check(sys, 1, a, b, 0.5), SpecError);
}

TEST_CASE("explicit-ratio ladder: sizes, heights, validation") {
    ScaleParams p = params_relaxed(1.0, 0.5, 1.2, 0.5, 0.9);
    ScaleSystem sys = scales_from_explicit(p, 2, {2, 2}, HeightMode::desk, 1);
    CHECK(sys.kmax() == 1);
    CHECK(sys.L_int(0) == 2);
    CHECK(sys.L_int(1) == 4);
    CHECK(sys.ratio_int(0) == 2);
    CHECK(sys.ratio_int(1) == 2);
    CHECK(sys.H_int(0) == 2);
    CHECK(sys.H_int(1) == 4);
    CHECK(sys.block_indices(1, 0) == std::pair<int64_t, int64_t>{0, 1});

    ScaleSystem tall = scales_from_explicit(p, 3, {4}, HeightMode::desk, 2);
    CHECK(tall.kmax() == 0);
    CHECK(tall.L_int(0) == 3);
    CHECK(tall.ratio_int(0) == 4);
    CHECK(tall.H_int(0) == 6);

    CHECK_THROWS_AS(scales_from_explicit(p, 1, {2}), SpecError);
    CHECK_THROWS_AS(scales_from_explicit(p, 2, {}), SpecError);
    CHECK_THROWS_AS(scales_from_explicit(p, 2, {2, 1}), SpecError);
}
