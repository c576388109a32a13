#include "stretchperc/scales.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stretchperc/io.hpp"

namespace stretchperc {

namespace mp = boost::multiprecision;

namespace {

void collect_violations(ScaleParams& p) {
    auto add = [&p](const std::string& s) { p.violations.push_back(s); };
    if (!(p.epsilon > 0)) add("epsilon must be > 0");
    if (!(p.alpha > 0 && p.alpha <= p.epsilon / 2))
        add("alpha must lie in (0, epsilon/2] = (0, " + fmt_double(p.epsilon / 2) + "]");
    double gmax = 1 + p.alpha / (p.alpha + 2);
    if (!(p.gamma > 1 && p.gamma < gmax))
        add("gamma must lie in (1, 1 + alpha/(alpha+2)) = (1, " + fmt_double(gmax) + ")");
    if (!(p.mu > 1 / p.gamma && p.mu < 1))
        add("mu must lie in (1/gamma, 1) = (" + fmt_double(1 / p.gamma) + ", 1)");
    double blo = p.gamma * p.mu - p.gamma + 1;
    if (!(blo < 1)) add("gamma*mu - gamma + 1 must be < 1");
    if (!(p.beta > blo && p.beta < 1))
        add("beta must lie in (gamma*mu - gamma + 1, 1) = (" + fmt_double(blo) + ", 1)");
    if (!(p.c2 > 0)) add("c2 = 2 + 2*alpha - gamma*alpha - 2*gamma must be > 0, got " +
                         fmt_double(p.c2));
    p.strict = p.violations.empty();
}

ScaleParams make_params(double epsilon, double alpha, double gamma, double mu, double beta) {
    ScaleParams p;
    p.epsilon = epsilon;
    p.alpha = alpha;
    p.gamma = gamma;
    p.mu = mu;
    p.beta = beta;
    p.c2 = 2 + 2 * alpha - gamma * alpha - 2 * gamma;
    collect_violations(p);
    return p;
}

}  // namespace

ScaleParams validate_params(double epsilon, double alpha, double gamma, double mu, double beta) {
    ScaleParams p = make_params(epsilon, alpha, gamma, mu, beta);
    if (!p.strict) {
        std::string msg = "invalid scale parameters:";
        for (const auto& v : p.violations) msg += "\n  - " + v;
        throw SpecError(msg);
    }
    return p;
}

ScaleParams params_relaxed(double epsilon, double alpha, double gamma, double mu, double beta) {
    ScaleParams p = make_params(epsilon, alpha, gamma, mu, beta);
    if (!(gamma > 1 && gamma < 2))
        throw SpecError("gamma must lie in (1, 2) even for relaxed parameters");
    return p;
}

std::string describe_feasible_region(double epsilon) {
    std::ostringstream os;
    os << "epsilon = " << fmt_double(epsilon) << "\n";
    os << "alpha   in (0, " << fmt_double(epsilon / 2) << "]\n";
    os << "gamma   in (1, 1 + alpha/(alpha+2))";
    os << "  (at alpha = " << fmt_double(epsilon / 2)
       << ": gamma < " << fmt_double(1 + (epsilon / 2) / (epsilon / 2 + 2)) << ")\n";
    os << "mu      in (1/gamma, 1)\n";
    os << "beta    in (gamma*mu - gamma + 1, 1)\n";
    os << "c2      = 2 + 2*alpha - gamma*alpha - 2*gamma > 0 on the gamma interval\n";
    os << "# epsilon is a free choice; pick it so E(xi^(1+epsilon)) is finite.\n";
    return os.str();
}

namespace {

enum class FloorStatus { ok, needs_more_digits };

template <class F>
FloorStatus try_certified_floor(const BigInt& L, double e, int digits, BigInt& out) {
    F x = mp::pow(F(L), F(e));
    // keep a 20-digit guard band between the integer part and the precision
    F budget = mp::pow(F(10), digits - 20);
    if (x >= budget) return FloorStatus::needs_more_digits;
    F f = mp::floor(x);
    F tol = x * mp::pow(F(10), -(digits - 20));
    if (x - f < tol || (f + 1) - x < tol) return FloorStatus::needs_more_digits;
    out = f.template convert_to<BigInt>();
    return FloorStatus::ok;
}

using BigFloatWide = mp::number<mp::cpp_bin_float<1000>>;

}  // namespace

BigInt floor_pow_certified(const BigInt& L, double e) {
    if (L <= 0) throw SpecError("floor_pow needs a positive base");
    if (e <= 0) throw SpecError("floor_pow needs a positive exponent");
    // exact path for small dyadic exponents e = a / 2^j
    {
        int exp2 = 0;
        double mant = std::frexp(e, &exp2);  // e = mant * 2^exp2, mant in [0.5, 1)
        double scaled = std::ldexp(mant, 6); // a candidate numerator over 2^(6-exp2)
        if (scaled == std::floor(scaled) && exp2 <= 6) {
            int64_t a = (int64_t)scaled;
            int j = 6 - exp2;
            while (j > 0 && a % 2 == 0) {
                a /= 2;
                --j;
            }
            if (a >= 1 && a <= 64) {
                BigInt r = mp::pow(L, (unsigned)a);
                for (int t = 0; t < j; ++t) r = mp::sqrt(r);  // floor of nested roots
                return r;
            }
        }
    }
    BigInt out;
    if (try_certified_floor<BigFloat>(L, e, 100, out) == FloorStatus::ok) return out;
    if (try_certified_floor<BigFloatWide>(L, e, 1000, out) == FloorStatus::ok) return out;
    throw SpecError("floor(L^e) cannot be certified at 1000-digit precision");
}

L0Check validate_L0(const ScaleParams& params, int64_t L0, double rho_eps_moment,
                    double c1_upper) {
    if (!std::isfinite(rho_eps_moment) || rho_eps_moment < 0)
        throw SpecError("E(rho^epsilon) must be a finite nonnegative number");
    if (!std::isfinite(c1_upper) || c1_upper < 0)
        throw SpecError("c1 upper bound must be a finite nonnegative number");
    if (L0 < 2) throw SpecError("L0 must be at least 2");
    auto check = [&](int64_t l0) {
        BigFloat bl(l0);
        bool g = mp::pow(bl, BigFloat(params.gamma - 1)) >= 3;
        bool m = mp::pow(bl, BigFloat(params.epsilon - params.alpha)) >= BigFloat(rho_eps_moment);
        bool c = mp::pow(bl, BigFloat(params.c2)) >= BigFloat(c1_upper) + 1;
        return std::array<bool, 3>{g, m, c};
    };
    L0Check out;
    auto r = check(L0);
    out.growth = r[0];
    out.moment = r[1];
    out.c1_margin = r[2];
    // conditions (i) and (ii) are monotone in L0; (iii) is too when c2 >= 0
    auto all = [&](int64_t l0) {
        auto v = check(l0);
        return v[0] && v[1] && v[2];
    };
    if (params.c2 >= 0) {
        int64_t hi = 2;
        while (hi < (int64_t(1) << 40) && !all(hi)) hi *= 2;
        if (all(hi)) {
            int64_t lo = hi / 2;
            while (lo + 1 < hi) {
                int64_t mid = lo + (hi - lo) / 2;
                if (all(mid))
                    hi = mid;
                else
                    lo = mid;
            }
            out.minimal_L0 = std::max<int64_t>(hi, 2);
        }
    } else if (all(2)) {
        out.minimal_L0 = 2;
    }
    return out;
}

int64_t ScaleSystem::L_int(int k) const {
    if (L[(size_t)k] > std::numeric_limits<int64_t>::max())
        throw SpecError("L_k exceeds 64-bit range; simulation at this scale is not feasible");
    return (int64_t)L[(size_t)k];
}

int64_t ScaleSystem::H_int(int k) const {
    if (height_mode != HeightMode::desk) throw SpecError("H_int is only defined in desk mode");
    if (H[(size_t)k] > std::numeric_limits<int64_t>::max())
        throw SpecError("H_k exceeds 64-bit range");
    return (int64_t)H[(size_t)k];
}

int64_t ScaleSystem::ratio_int(int k) const {
    if (ratio[(size_t)k] > std::numeric_limits<int64_t>::max())
        throw SpecError("block ratio exceeds 64-bit range");
    return (int64_t)ratio[(size_t)k];
}

std::pair<int64_t, int64_t> ScaleSystem::block_indices(int k, int64_t j) const {
    if (k < 1) throw SpecError("block indices are defined for k >= 1");
    int64_t m = ratio_int(k - 1);
    return {j * m, (j + 1) * m - 1};
}

double ScaleSystem::log10_H(int k) const {
    if (height_mode == HeightMode::desk)
        return (double)(mp::log(BigFloat(H[(size_t)k])) / mp::log(BigFloat(10)));
    return (double)(Hlog[(size_t)k] / mp::log(BigFloat(10)));
}

double ScaleSystem::log10_L(int k) const {
    return (double)(mp::log(BigFloat(L[(size_t)k])) / mp::log(BigFloat(10)));
}

static void fill_heights(ScaleSystem& sys, int kmax) {
    if (sys.height_mode == HeightMode::desk) {
        for (const auto& l : sys.L) sys.H.push_back(BigInt(sys.desk_h) * l);
    } else {
        sys.Hlog.push_back(mp::log(BigFloat(100)));
        for (int k = 1; k <= kmax; ++k) {
            BigFloat x = mp::pow(BigFloat(sys.L[(size_t)k]), BigFloat(sys.params.mu));
            BigFloat term;
            // ulp(exp(x)) exceeds 1 once x > 332 ln 2 ~ 230, after which the
            // ceiling is below representable resolution anyway
            if (x < 300) {
                term = mp::log(mp::ceil(mp::exp(x)));
            } else {
                term = x;
            }
            sys.Hlog.push_back(mp::log(BigFloat(2)) + term + sys.Hlog.back());
        }
    }
}

ScaleSystem build_scales(const ScaleParams& params, int64_t L0, int kmax, HeightMode mode,
                         int64_t desk_h) {
    if (kmax < 0) throw SpecError("kmax must be >= 0");
    if (L0 < 2) throw SpecError("L0 must be at least 2");
    {
        BigFloat growth = mp::pow(BigFloat(L0), BigFloat(params.gamma - 1));
        if (growth < 3) throw SpecError("L0^(gamma-1) >= 3 required to build the ladder");
    }
    ScaleSystem sys;
    sys.params = params;
    sys.L0 = L0;
    sys.height_mode = mode;
    sys.desk_h = desk_h;
    sys.L.push_back(BigInt(L0));
    for (int k = 0; k < kmax; ++k) {
        BigInt m = floor_pow_certified(sys.L.back(), params.gamma - 1);
        sys.ratio.push_back(m);
        sys.L.push_back(sys.L.back() * m);
    }
    if ((int)sys.ratio.size() < kmax + 1)
        sys.ratio.push_back(floor_pow_certified(sys.L.back(), params.gamma - 1));

    // sandwich: (2/3)^k L0^(gamma^k) <= L_k <= L0^(gamma^k)
    BigFloat lnL0 = mp::log(BigFloat(L0));
    BigFloat ln23 = mp::log(BigFloat(2) / 3);
    for (int k = 0; k <= kmax; ++k) {
        BigFloat lnLk = mp::log(BigFloat(sys.L[(size_t)k]));
        BigFloat gk = mp::pow(BigFloat(params.gamma), k);
        BigFloat slack = BigFloat("1e-60") * gk * lnL0;
        if (lnLk > gk * lnL0 + slack || lnLk < gk * lnL0 + k * ln23 - slack)
            throw SpecError("scale sandwich violated at k = " + std::to_string(k));
    }

    fill_heights(sys, kmax);
    return sys;
}

ScaleSystem scales_from_explicit(const ScaleParams& params, int64_t L0,
                                 const std::vector<int64_t>& ratios, HeightMode mode,
                                 int64_t desk_h) {
    if (L0 < 2) throw SpecError("L0 must be at least 2");
    if (ratios.empty()) throw SpecError("explicit ladder needs at least one ratio");
    ScaleSystem sys;
    sys.params = params;
    sys.L0 = L0;
    sys.height_mode = mode;
    sys.desk_h = desk_h;
    sys.L.push_back(BigInt(L0));
    for (size_t k = 0; k + 1 < ratios.size(); ++k) {
        if (ratios[k] < 2) throw SpecError("explicit ratios must be at least 2");
        sys.ratio.push_back(BigInt(ratios[k]));
        sys.L.push_back(sys.L.back() * ratios[k]);
    }
    if (ratios.back() < 2) throw SpecError("explicit ratios must be at least 2");
    sys.ratio.push_back(BigInt(ratios.back()));
    fill_heights(sys, int(ratios.size()) - 1);
    return sys;
}

std::string BlockLabelGrid::rle_dump() const {
    std::ostringstream os;
    for (int k = 0; k <= kmax; ++k) {
        os << "scale " << k << ":";
        const auto& row = bad[(size_t)k];
        size_t j = 0;
        bool any = false;
        while (j < row.size()) {
            if (row[j]) {
                size_t e = j;
                while (e + 1 < row.size() && row[e + 1]) ++e;
                os << " bad[" << j << "," << e + 1 << ")";
                any = true;
                j = e + 1;
            } else {
                ++j;
            }
        }
        if (!any) os << " all-good";
        os << " (" << row.size() << " blocks)\n";
    }
    return os.str();
}

BlockLabelGrid label_blocks(const EnvironmentWindow& env, const ScaleSystem& sys, int kmax,
                            double horizon) {
    if (kmax > sys.kmax()) throw SpecError("grid kmax exceeds the scale system");
    if (horizon < 0) horizon = env.max_column();
    if (horizon > env.max_column())
        throw SpecError("labeling horizon extends beyond the realized window");
    BlockLabelGrid grid;
    grid.kmax = kmax;
    grid.bad.resize((size_t)kmax + 1);

    int64_t L0 = sys.L0;
    int64_t n0 = (int64_t)std::floor(horizon / (double)L0 + 1e-12);
    if (n0 < 1) throw SpecError("environment horizon shorter than one level-0 block");
    auto& lvl0 = grid.bad[0];
    lvl0.resize((size_t)n0);
    for (int64_t j = 0; j < n0; ++j) {
        double lo = (double)(j * L0), hi = (double)((j + 1) * L0);
        lvl0[(size_t)j] = env.any_column_in(lo, hi) ? 0 : 1;
    }
    for (int k = 1; k <= kmax; ++k) {
        int64_t m = sys.ratio_int(k - 1);
        int64_t nk = (int64_t)grid.bad[(size_t)k - 1].size() / m;
        if (nk < 1)
            throw SpecError("environment horizon shorter than one block at scale " +
                            std::to_string(k));
        auto& prev = grid.bad[(size_t)k - 1];
        auto& cur = grid.bad[(size_t)k];
        cur.resize((size_t)nk);
        for (int64_t j = 0; j < nk; ++j) {
            int64_t first = -1, last = -1;
            for (int64_t i = j * m; i < (j + 1) * m; ++i) {
                if (prev[(size_t)i]) {
                    if (first < 0) first = i;
                    last = i;
                }
            }
            cur[(size_t)j] = (first >= 0 && last - first >= 2) ? 1 : 0;
        }
    }
    return grid;
}

std::pair<int, int64_t> find_good_block_violation(const BlockLabelGrid& grid,
                                                  const ScaleSystem& sys) {
    for (int k = 1; k <= grid.kmax; ++k) {
        int64_t m = sys.ratio_int(k - 1);
        for (int64_t j = 0; j < grid.blocks_at(k); ++j) {
            if (grid.is_bad(k, j)) continue;
            int64_t count = 0, first = -1, last = -1;
            for (int64_t i = j * m; i < (j + 1) * m; ++i) {
                if (grid.is_bad(k - 1, i)) {
                    ++count;
                    if (first < 0) first = i;
                    last = i;
                }
            }
            if (count > 2 || (count == 2 && last - first != 1)) return {k, j};
        }
    }
    return {-1, -1};
}

PkEstimate estimate_pk(const InterarrivalSpec& spec, const ScaleSystem& sys, int k,
                       int64_t n_samples, RngStream& rng) {
    if (n_samples < 1) throw SpecError("need at least one sample");
    PkEstimate out;
    out.k = k;
    out.n_samples = n_samples;
    int64_t horizon = sys.L_int(k);
    DelaySpec st = DelaySpec::stationary();
    for (int64_t s = 0; s < n_samples; ++s) {
        EnvironmentWindow env = realize_to_horizon(spec, st, (double)horizon, rng);
        BlockLabelGrid grid = label_blocks(env, sys, k, (double)horizon);
        if (grid.is_bad(k, 0)) ++out.n_bad;
    }
    out.p_hat = (double)out.n_bad / (double)n_samples;
    auto ci = wilson_ci((uint64_t)out.n_bad, (uint64_t)n_samples, 3.0);
    out.ci_lo = ci.lo;
    out.ci_hi = ci.hi;
    out.log10_bound = -sys.params.alpha * sys.log10_L(k);
    double bound = std::pow(10.0, out.log10_bound);
    out.bound_pass = out.ci_hi <= bound;
    out.indistinguishable = out.n_bad == 0;
    return out;
}

PkRecursionCheck pk_recursion_check(const ScaleSystem& sys, int k, const PkEstimate& pk,
                                    const PkEstimate& pk1, double c1_hat) {
    if (pk.k != k || pk1.k != k + 1) throw SpecError("recursion check needs estimates at k, k+1");
    PkRecursionCheck out;
    double Lk = (double)sys.L_int(k);
    out.lhs = pk1.p_hat;
    out.rhs = std::pow(Lk, 2 * (sys.params.gamma - 1)) *
              (pk.p_hat * pk.p_hat + c1_hat * std::pow(Lk, -sys.params.epsilon));
    out.holds = out.lhs <= out.rhs;
    return out;
}

}  // namespace stretchperc
