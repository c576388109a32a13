#include "stretchperc/crossings.hpp"

#include <algorithm>
#include <string>

#include "stretchperc/io.hpp"

namespace stretchperc {

namespace {

void check_scale(const ScaleSystem& sys, int k) {
    if (k < 0 || k > sys.kmax()) throw SpecError("scale index out of range");
}

}  // namespace

Rectangle c_rect(const ScaleSystem& sys, int k, int64_t i, int64_t j) {
    check_scale(sys, k);
    int64_t L = sys.L_int(k), H = sys.H_int(k);
    return Rectangle(i * L, (i + 2) * L, j * H, (j + 1) * H);
}

Rectangle d_rect(const ScaleSystem& sys, int k, int64_t i, int64_t j) {
    check_scale(sys, k);
    int64_t L = sys.L_int(k), H = sys.H_int(k);
    return Rectangle(i * L, (i + 1) * L, j * H, (j + 2) * H);
}

Rectangle dependency_rect(const ScaleSystem& sys, int k, int64_t i, int64_t j) {
    check_scale(sys, k);
    int64_t L = sys.L_int(k), H = sys.H_int(k);
    return Rectangle(i * L, (i + 2) * L, j * H, (j + 2) * H);
}

CdReport cd_event(const PercWindow& w, const ScaleSystem& sys, int k, int64_t i, int64_t j) {
    CdReport out;
    out.k = k;
    out.i = i;
    out.j = j;
    out.c = crossing(w, c_rect(sys, k, i, j), 'h').indicator;
    out.d = crossing(w, d_rect(sys, k, i, j), 'v').indicator;
    return out;
}

std::pair<double, double> exact_cd_fail(const EnvironmentWindow& env, const ScaleSystem& sys,
                                        double p, int k, int64_t i, int64_t j) {
    double pc = exact_crossing_prob(env, p, c_rect(sys, k, i, j), Formulation::dilute, 'h');
    double pd = exact_crossing_prob(env, p, d_rect(sys, k, i, j), Formulation::dilute, 'v');
    return {1.0 - pc, 1.0 - pd};
}

Rectangle qk_window_region(const ScaleSystem& sys, int k) {
    check_scale(sys, k);
    return Rectangle(0, 2 * sys.L_int(k), 0, 2 * sys.H_int(k));
}

QkEstimate estimate_qk(const InterarrivalSpec& spec, const ScaleSystem& sys, double p, int k,
                       int64_t n_envs, int64_t n_configs, RngStream& rng,
                       int64_t rejection_cap) {
    if (n_envs < 1 || n_configs < 1) throw SpecError("need at least one environment and config");
    Rectangle region = qk_window_region(sys, k);
    double horizon = (double)(2 * sys.L_int(k));
    DelaySpec st = DelaySpec::stationary();

    QkEstimate out;
    out.k = k;
    out.p = p;
    out.n_envs = n_envs;
    out.n_configs = n_configs;
    out.table.reserve((size_t)n_envs);

    for (int64_t e = 0; e < n_envs; ++e) {
        RngStream env_rng = rng.child(2 * (uint64_t)e);
        QkEnvRow row;
        for (;;) {
            EnvironmentWindow env = realize_to_horizon(spec, st, horizon, env_rng);
            BlockLabelGrid labels = label_blocks(env, sys, k, horizon);
            if (!labels.is_bad(k, 0)) {
                row.env = std::move(env);
                row.i1_good = labels.blocks_at(k) > 1 && !labels.is_bad(k, 1);
                break;
            }
            if (++out.rejections > rejection_cap)
                throw SpecError("good-block rejection cap exceeded at scale " + std::to_string(k));
        }

        RngStream cfg_root = rng.child(2 * (uint64_t)e + 1);
        for (int64_t c = 0; c < n_configs; ++c) {
            RngStream cfg_rng = cfg_root.child((uint64_t)c);
            PercWindow w = sample_window(row.env, p, region, Formulation::dilute, cfg_rng);
            CdReport cd = cd_event(w, sys, k, 0, 0);
            ++row.n_d;
            if (!cd.d) ++row.d_fail_count;
            if (row.i1_good) {
                ++row.n_c;
                if (!cd.c) ++row.c_fail_count;
            }
        }
        if (row.n_c > 0) {
            WilsonInterval ci = wilson_ci((uint64_t)row.c_fail_count, (uint64_t)row.n_c, 3.0);
            row.c_fail_hat = (double)row.c_fail_count / (double)row.n_c;
            row.c_lo = ci.lo;
            row.c_hi = ci.hi;
        }
        {
            WilsonInterval ci = wilson_ci((uint64_t)row.d_fail_count, (uint64_t)row.n_d, 3.0);
            row.d_fail_hat = (double)row.d_fail_count / (double)row.n_d;
            row.d_lo = ci.lo;
            row.d_hi = ci.hi;
        }
        out.table.push_back(std::move(row));
    }

    bool any_c = false;
    for (const QkEnvRow& row : out.table) {
        if (row.n_c > 0 && (!any_c || row.c_fail_hat > out.worst_c_fail)) {
            any_c = true;
            out.worst_c_fail = row.c_fail_hat;
            out.worst_c_lo = row.c_lo;
            out.worst_c_hi = row.c_hi;
        }
        if (row.d_fail_hat >= out.worst_d_fail) {
            out.worst_d_fail = row.d_fail_hat;
            out.worst_d_lo = row.d_lo;
            out.worst_d_hi = row.d_hi;
        }
    }
    out.qk_hat = std::max(out.worst_c_fail, out.worst_d_fail);
    return out;
}

BandWitnessReport band_witness(const PercWindow& w, const ScaleSystem& sys,
                               const BlockLabelGrid& labels, int k) {
    check_scale(sys, k);
    if (labels.kmax < k + 1) throw SpecError("band witness needs labels at scale k+1");
    int64_t L = sys.L_int(k), H = sys.H_int(k);
    int64_t m = sys.ratio_int(k);
    int64_t band_w = 2 * m * L;
    Rectangle band(0, band_w, 0, 2 * H);
    if (!w.region.contains_rect(band)) throw SpecError("window does not cover the band");
    if (labels.blocks_at(k) < 2 * m || labels.blocks_at(k + 1) < 2)
        throw SpecError("labels do not cover the band");
    if (labels.is_bad(k + 1, 0) || labels.is_bad(k + 1, 1))
        throw SpecError("band witness needs good blocks at scale k+1");

    BandWitnessReport rep;
    rep.k = k;
    rep.m = m;
    rep.j0 = 0;
    for (int64_t j = 0; j < m; ++j)
        if (labels.is_bad(k, j)) {
            rep.j0 = j;
            break;
        }
    rep.j1 = m;
    for (int64_t j = m; j < 2 * m; ++j)
        if (labels.is_bad(k, j)) {
            rep.j1 = j;
            break;
        }

    // Bridge around child j: one block of margin each side, clipped to the
    // band. Four blocks at most, which is what the bottom-row cost bound uses.
    auto bridge = [&](int64_t j) -> std::pair<int64_t, int64_t> {
        int64_t lo = std::max<int64_t>(0, (j - 1) * L);
        int64_t hi = std::min<int64_t>(band_w, (j + 3) * L);
        if (hi - lo > 4 * L) throw SpecError("bridge interval exceeds four blocks");
        return {lo, hi};
    };
    auto bottom_open = [&](int64_t lo, int64_t hi) {
        for (int64_t x = lo; x < hi; ++x)
            if (!w.is_open(w.region.edge_index(x, 0, 0))) return false;
        return true;
    };
    std::tie(rep.i0_lo, rep.i0_hi) = bridge(rep.j0);
    std::tie(rep.i1_lo, rep.i1_hi) = bridge(rep.j1);
    rep.b0 = bottom_open(rep.i0_lo, rep.i0_hi);
    rep.b1 = bottom_open(rep.i1_lo, rep.i1_hi);

    rep.all_witness = rep.b0 && rep.b1;
    for (int64_t i = 0; i <= 2 * m - 2; ++i) {
        if (labels.is_bad(k, i) || labels.is_bad(k, i + 1)) continue;
        bool bit = crossing(w, c_rect(sys, k, i, 0), 'h').indicator;
        rep.c_bits.emplace_back(i, bit);
        rep.all_witness = rep.all_witness && bit;
    }
    for (int64_t j = 0; j <= 2 * m - 1; ++j) {
        if (labels.is_bad(k, j)) continue;
        bool bit = crossing(w, d_rect(sys, k, j, 0), 'v').indicator;
        rep.d_bits.emplace_back(j, bit);
        rep.all_witness = rep.all_witness && bit;
    }

    rep.g = crossing(w, band, 'h').indicator;
    rep.inclusion_holds = !rep.all_witness || rep.g;
    return rep;
}

bool SiteGrid::at(int64_t i, int64_t j) const {
    if (i < i_lo || i > i_hi || j < j_lo || j > j_hi)
        throw SpecError("site outside the computed grid");
    size_t stride = (size_t)(i_hi - i_lo + 1);
    return bits[(size_t)(j - j_lo) * stride + (size_t)(i - i_lo)] != 0;
}

SiteGrid renormalized_sites(const PercWindow& w, const ScaleSystem& sys, int k,
                            int64_t i_lo, int64_t i_hi, int64_t j_lo, int64_t j_hi) {
    if (i_lo > i_hi || j_lo > j_hi) throw SpecError("empty site range");
    SiteGrid grid;
    grid.k = k;
    grid.i_lo = i_lo;
    grid.i_hi = i_hi;
    grid.j_lo = j_lo;
    grid.j_hi = j_hi;
    grid.bits.resize((size_t)(i_hi - i_lo + 1) * (size_t)(j_hi - j_lo + 1));
    size_t pos = 0;
    for (int64_t j = j_lo; j <= j_hi; ++j)
        for (int64_t i = i_lo; i <= i_hi; ++i) {
            CdReport cd = cd_event(w, sys, k, i, j);
            grid.bits[pos++] = (cd.c && cd.d) ? 1 : 0;
        }
    return grid;
}

PercWindow resample_outside(const PercWindow& w, const Rectangle& keep, RngStream& fresh) {
    PercWindow out = w;
    out.has_rng = false;  // mixed uniforms, no single seed reproduces them
    int64_t n = w.region.n_edges();
    for (int64_t e = 0; e < n; ++e) {
        EdgeRef er = edge_at(w.region, e);
        bool kept = er.x >= keep.a && er.x < keep.b && er.y >= keep.c && er.y < keep.d;
        if (!kept) out.uniforms[(size_t)e] = fresh.uniform_at((uint64_t)e);
    }
    out.rethreshold(w.p);
    return out;
}

Rectangle ladder_window_region(const ScaleSystem& sys, int K) {
    check_scale(sys, K);
    return Rectangle(0, sys.L_int(K) * sys.ratio_int(K), 0, 2 * sys.H_int(K));
}

LadderReport ladder_certificate(const PercWindow& w, const ScaleSystem& sys, int k0, int K) {
    check_scale(sys, k0);
    check_scale(sys, K);
    if (k0 > K) throw SpecError("ladder needs k0 <= K");
    Rectangle need = ladder_window_region(sys, K);
    if (!w.region.contains_rect(need)) throw SpecError("window does not cover the ladder");

    LadderReport rep;
    rep.k0 = k0;
    rep.K = K;
    rep.certificate = true;
    for (int k = k0; k <= K && rep.certificate; ++k) {
        int64_t r = sys.ratio_int(k);
        for (int64_t i = 0; i + 2 <= r && rep.certificate; ++i) {
            CdReport cd = cd_event(w, sys, k, i, 0);
            rep.certificate = cd.c && cd.d;
        }
    }

    std::vector<Vertex> A, B;
    for (int64_t x = 0; x <= sys.L_int(k0); ++x) A.emplace_back(x, 0);
    for (int64_t x = need.a; x <= need.b; ++x) B.emplace_back(x, need.d);
    rep.connectivity = connected_in(w, need, A, B);
    rep.implication_holds = !rep.certificate || rep.connectivity;
    return rep;
}

}  // namespace stretchperc
