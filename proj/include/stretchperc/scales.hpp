#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "stretchperc/environment.hpp"
#include "stretchperc/interarrival.hpp"
#include "stretchperc/rng.hpp"

namespace stretchperc {

using BigInt = boost::multiprecision::cpp_int;
using BigFloat = boost::multiprecision::cpp_bin_float_100;

struct ScaleParams {
    double epsilon = 0, alpha = 0, gamma = 0, mu = 0, beta = 0;
    double c2 = 0;  // 2 + 2*alpha - gamma*alpha - 2*gamma
    bool strict = true;                   // passed every interval constraint
    std::vector<std::string> violations;  // populated by the relaxed maker
};

// Throws SpecError listing every violated interval constraint.
ScaleParams validate_params(double epsilon, double alpha, double gamma, double mu, double beta);
// Records violations instead of throwing; ladder building only needs gamma in (1,2).
ScaleParams params_relaxed(double epsilon, double alpha, double gamma, double mu, double beta);
// Human-readable feasible-region description for a given epsilon.
std::string describe_feasible_region(double epsilon);

struct L0Check {
    bool growth = false;       // (i)   L0^(gamma-1) >= 3
    bool moment = false;       // (ii)  L0^(epsilon-alpha) >= E(rho^epsilon)
    bool c1_margin = false;    // (iii) L0^c2 >= c1 + 1
    int64_t minimal_L0 = -1;   // smallest L0 passing all three; -1 if none found
    bool pass() const { return growth && moment && c1_margin; }
};
L0Check validate_L0(const ScaleParams& params, int64_t L0, double rho_eps_moment,
                    double c1_upper);

// floor(L^e) with a certified result: exact for small dyadic e, otherwise
// 100-digit evaluation that refuses when the floor is ambiguous.
BigInt floor_pow_certified(const BigInt& L, double e);

// exact_log: the theoretical schedule H_0 = 100, H_k = 2*ceil(exp(L_k^mu))*H_{k-1},
// stored as ln H_k (H_1 already overflows fixed-width types at validated L0).
// desk: H_k = h*L_k, the simulation-friendly substitute.
enum class HeightMode { exact_log, desk };

struct ScaleSystem {
    ScaleParams params;
    int64_t L0 = 0;
    std::vector<BigInt> L;      // L_0 .. L_kmax
    std::vector<BigInt> ratio;  // ratio[k] = floor(L_k^(gamma-1)); L_{k+1} = L_k * ratio[k]
    HeightMode height_mode = HeightMode::desk;
    int64_t desk_h = 4;
    std::vector<BigInt> H;       // desk mode: H_k = h * L_k
    std::vector<BigFloat> Hlog;  // exact_log mode: ln H_k

    int kmax() const { return (int)L.size() - 1; }
    int64_t L_int(int k) const;      // throws if L_k exceeds int64
    int64_t H_int(int k) const;      // desk mode only
    int64_t ratio_int(int k) const;  // throws if ratio exceeds int64
    // l_{k,j} = {j*m, ..., (j+1)*m - 1} with m = ratio[k-1]; k >= 1
    std::pair<int64_t, int64_t> block_indices(int k, int64_t j) const;
    double log10_H(int k) const;
    double log10_L(int k) const;
};

ScaleSystem build_scales(const ScaleParams& params, int64_t L0, int kmax,
                         HeightMode mode = HeightMode::desk, int64_t desk_h = 4);

// Ladder with prescribed ratios L_{k+1} = L_k * ratios[k] (each >= 2), for
// certificate experiments at sizes where floor(L^(gamma-1)) would be too small
// to give the index sets any room. Skips the growth precondition and the
// sandwich check; heights follow the chosen mode as in build_scales.
ScaleSystem scales_from_explicit(const ScaleParams& params, int64_t L0,
                                 const std::vector<int64_t>& ratios,
                                 HeightMode mode = HeightMode::desk, int64_t desk_h = 4);

struct BlockLabelGrid {
    int kmax = 0;
    std::vector<std::vector<uint8_t>> bad;  // bad[k][j]

    int64_t blocks_at(int k) const { return (int64_t)bad[(size_t)k].size(); }
    bool is_bad(int k, int64_t j) const { return bad[(size_t)k][(size_t)j] != 0; }
    std::string rle_dump() const;  // one line per scale, bad intervals run-length encoded
};

// Level 0: block j is bad iff no column lies in [j*L0, (j+1)*L0] (the forward
// recurrence form Z_{j L0} > L0). Level k: bad iff two bad children with index
// gap >= 2. horizon < 0 means label the whole realized window; otherwise only
// blocks inside [0, horizon] are labeled (horizon must not exceed the window,
// since the window carries no information beyond its last column).
BlockLabelGrid label_blocks(const EnvironmentWindow& env, const ScaleSystem& sys, int kmax,
                            double horizon = -1);

// Structural invariant of the recursion: every good block has at most two bad
// children and any two bad children are adjacent. Returns offending (k, j) or
// (-1, -1).
std::pair<int, int64_t> find_good_block_violation(const BlockLabelGrid& grid,
                                                  const ScaleSystem& sys);

struct PkEstimate {
    int k = 0;
    int64_t n_samples = 0, n_bad = 0;
    double p_hat = 0, ci_lo = 0, ci_hi = 0;  // Wilson, z = 3
    double log10_bound = 0;                  // log10 of L_k^(-alpha)
    bool bound_pass = false;                 // ci_hi <= bound
    bool indistinguishable = false;          // zero hits: p_hat is only an upper bound
};
PkEstimate estimate_pk(const InterarrivalSpec& spec, const ScaleSystem& sys, int k,
                       int64_t n_samples, RngStream& rng);

struct PkRecursionCheck {
    double lhs = 0, rhs = 0;
    bool holds = false;
};
// p_{k+1} <= L_k^{2(gamma-1)} (p_k^2 + c1 L_k^{-epsilon}), point estimates.
PkRecursionCheck pk_recursion_check(const ScaleSystem& sys, int k, const PkEstimate& pk,
                                    const PkEstimate& pk1, double c1_hat);

}  // namespace stretchperc
