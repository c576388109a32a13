#pragma once
#include <cstdint>
#include <utility>
#include <vector>

#include "stretchperc/environment.hpp"
#include "stretchperc/interarrival.hpp"
#include "stretchperc/lattice.hpp"
#include "stretchperc/rng.hpp"
#include "stretchperc/scales.hpp"

namespace stretchperc {

// Block-event rectangles at scale k. C spans two column blocks and one height
// block; D spans one column block and two height blocks. Heights come from the
// system's desk schedule (the log-only schedule cannot be materialized).
Rectangle c_rect(const ScaleSystem& sys, int k, int64_t i, int64_t j);
Rectangle d_rect(const ScaleSystem& sys, int k, int64_t i, int64_t j);
// Union of both: everything renormalized site (i,j) can depend on.
Rectangle dependency_rect(const ScaleSystem& sys, int k, int64_t i, int64_t j);

struct CdReport {
    int k = 0;
    int64_t i = 0, j = 0;
    bool c = false;  // horizontal crossing of c_rect
    bool d = false;  // vertical crossing of d_rect
};
CdReport cd_event(const PercWindow& w, const ScaleSystem& sys, int k, int64_t i, int64_t j);

// Exact failure probabilities (P(not C), P(not D)) by enumeration; both
// rectangles must fit the brute-force oracle's edge cap.
std::pair<double, double> exact_cd_fail(const EnvironmentWindow& env, const ScaleSystem& sys,
                                        double p, int k, int64_t i, int64_t j);

struct QkEnvRow {
    EnvironmentWindow env;
    bool i1_good = false;  // second column block good: C was evaluated
    int64_t n_c = 0, c_fail_count = 0;
    int64_t n_d = 0, d_fail_count = 0;
    double c_fail_hat = 0, c_lo = 0, c_hi = 0;  // Wilson, z = 3
    double d_fail_hat = 0, d_lo = 0, d_hi = 0;
};

struct QkEstimate {
    int k = 0;
    double p = 0;
    int64_t n_envs = 0, n_configs = 0;
    int64_t rejections = 0;  // environments discarded by the good-block filter
    // Worst sampled environment per event. The true q_k maximizes over all
    // good environments, so these are lower bounds on it.
    bool lower_bound_on_max = true;
    double worst_c_fail = 0, worst_c_lo = 0, worst_c_hi = 0;
    double worst_d_fail = 0, worst_d_lo = 0, worst_d_hi = 0;
    double qk_hat = 0;  // max(worst_c_fail, worst_d_fail)
    std::vector<QkEnvRow> table;
};

// Region the estimator samples: [0, 2 L_k) x [0, 2 H_k), dilute formulation.
Rectangle qk_window_region(const ScaleSystem& sys, int k);

// Rejection-samples stationary environments until block (k, 0) is good, then
// estimates failure frequencies of C^k_{0,0} (only when block (k, 1) is also
// good) and D^k_{0,0} over n_configs fresh configurations per environment.
// Throws when a single environment costs more than rejection_cap discards.
QkEstimate estimate_qk(const InterarrivalSpec& spec, const ScaleSystem& sys, double p, int k,
                       int64_t n_envs, int64_t n_configs, RngStream& rng,
                       int64_t rejection_cap = 1000000);

struct BandWitnessReport {
    int k = 0;
    int64_t m = 0;       // ratio at scale k: the band holds 2m column blocks
    int64_t j0 = 0, j1 = 0;  // earliest bad child per half (defaults 0 and m)
    int64_t i0_lo = 0, i0_hi = 0, i1_lo = 0, i1_hi = 0;  // bridge intervals I*_0, I*_1
    std::vector<std::pair<int64_t, bool>> c_bits;  // (i, C^k_{i,0}) over good pairs
    std::vector<std::pair<int64_t, bool>> d_bits;  // (j, D^k_{j,0}) over good children
    bool b0 = false, b1 = false;  // all bottom edges open along each bridge
    bool all_witness = false;     // conjunction of every event above
    bool g = false;               // horizontal crossing of [0, 2 L_{k+1}) x [0, 2 H_k)
    bool inclusion_holds = false; // all_witness implies g
};

// Evaluates the witness decomposition of the scale-(k+1) horizontal crossing:
// C over pairs of good children, D over good children, and open bottom rows
// bridging each half's bad run. Requires scale-(k+1) blocks 0 and 1 labeled
// good (the decomposition presumes each half's bad children form one adjacent
// run) and a window covering the band.
BandWitnessReport band_witness(const PercWindow& w, const ScaleSystem& sys,
                               const BlockLabelGrid& labels, int k);

struct SiteGrid {
    int k = 0;
    int64_t i_lo = 0, i_hi = 0, j_lo = 0, j_hi = 0;  // inclusive site ranges
    std::vector<uint8_t> bits;                       // row-major, j outer
    bool at(int64_t i, int64_t j) const;
};

// Site (i,j) open iff C^k_{i,j} and D^k_{i,j} both occur. Each site reads only
// edges inside dependency_rect(sys, k, i, j).
SiteGrid renormalized_sites(const PercWindow& w, const ScaleSystem& sys, int k,
                            int64_t i_lo, int64_t i_hi, int64_t j_lo, int64_t j_hi);

// Copy of w with every edge whose cell lies outside keep redrawn from fresh
// uniforms. Kept edges keep their uniforms bit-for-bit; the result carries no
// reproducing seed.
PercWindow resample_outside(const PercWindow& w, const Rectangle& keep, RngStream& fresh);

struct LadderReport {
    int k0 = 0, K = 0;
    bool certificate = false;   // all C^k_{i,0}, D^k_{i,0}, k0 <= k <= K, i <= ratio_k - 2
    bool connectivity = false;  // bottom of the first block reaches the top of the scale-K band
    bool implication_holds = false;  // certificate implies connectivity
};

// Region the certificate needs: [0, L_{K+1}) x [0, 2 H_K).
Rectangle ladder_window_region(const ScaleSystem& sys, int K);

LadderReport ladder_certificate(const PercWindow& w, const ScaleSystem& sys, int k0, int K);

}  // namespace stretchperc
