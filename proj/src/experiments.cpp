#include "stretchperc/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"

#include "stretchperc/crossings.hpp"
#include "stretchperc/environment.hpp"

namespace stretchperc {

void parallel_for(int64_t n, int threads, const std::function<void(int64_t)>& body) {
    if (n <= 0) return;
    if (threads <= 1 || n == 1) {
        for (int64_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int64_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    int use = int(std::min<int64_t>(threads, n));
    std::vector<std::thread> pool;
    pool.reserve(size_t(use));
    for (int t = 0; t < use; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                int64_t i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= n) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    next.store(n, std::memory_order_relaxed);  // drain remaining work
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace {

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    for (const auto& tok : split(s, ','))
        if (!trim(tok).empty()) out.push_back(parse_double_strict(trim(tok)));
    return out;
}

std::vector<int64_t> parse_int_list(const std::string& s) {
    std::vector<int64_t> out;
    for (const auto& tok : split(s, ','))
        if (!trim(tok).empty()) out.push_back(parse_int_strict(trim(tok)));
    return out;
}

const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys = {
        // common
        "spec", "formulation", "p_grid", "box", "replicas", "seed", "threads", "tasks", "out",
        // heavy tail
        "ht_eta", "ht_p", "ht_ik", "ht_samples", "ht_horizon", "ht_decay_n", "ht_decay_samples",
        "ht_budget",
        // scale parameters shared by certificate and audit ladders
        "epsilon", "alpha", "gamma", "mu", "beta", "L0", "desk_h", "waive_validation", "c1_upper",
        // certificate ladder
        "cert_p", "cert_ratios", "cert_k0", "cert_K", "cert_envs", "cert_cfgs", "cert_trials",
        // decoupling / p_k audit
        "audit_kmax", "audit_samples",
    };
    return keys;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    cfg.kv = KvBlock::parse(text);
    for (const auto& [key, value] : cfg.kv.items()) {
        (void)value;
        if (!known_config_keys().count(key)) throw SpecError("unknown config key: " + key);
    }
    if (cfg.kv.has("spec")) cfg.spec = InterarrivalSpec::parse_compact(cfg.kv.get("spec"));
    if (cfg.kv.has("formulation")) cfg.formulation = parse_formulation(cfg.kv.get("formulation"));
    if (cfg.kv.has("p_grid")) cfg.p_grid = parse_double_list(cfg.kv.get("p_grid"));
    if (cfg.kv.has("box")) cfg.box = cfg.kv.get_int("box");
    if (cfg.kv.has("replicas")) cfg.replicas = cfg.kv.get_int("replicas");
    if (cfg.kv.has("seed")) cfg.seed = uint64_t(cfg.kv.get_int("seed"));
    if (cfg.kv.has("threads")) cfg.threads = int(cfg.kv.get_int("threads"));
    if (cfg.kv.has("out")) cfg.out = cfg.kv.get("out");
    if (cfg.kv.has("tasks"))
        for (const auto& t : split(cfg.kv.get("tasks"), ','))
            if (!trim(t).empty()) cfg.tasks.push_back(trim(t));
    for (const auto& t : cfg.tasks)
        if (t != "sweep" && t != "heavytail" && t != "certificate" && t != "audit")
            throw SpecError("unknown task: " + t);
    if (cfg.box < 1) throw SpecError("box must be positive");
    if (cfg.replicas < 1) throw SpecError("replicas must be positive");
    if (cfg.threads < 1) throw SpecError("threads must be positive");
    for (double p : cfg.p_grid)
        if (!(p >= 0.0 && p <= 1.0)) throw SpecError("p_grid entries must lie in [0,1]");
    return cfg;
}

namespace {

// Binomial logistic regression of hits/n on p by Newton iteration. Returns
// false when the design is degenerate (flat curve, separation, non-rising
// slope), in which case no crossing parameter is defined.
bool logistic_fit(const std::vector<double>& x, const std::vector<int64_t>& hits, int64_t n,
                  double* beta0, double* beta1) {
    double total = 0;
    for (int64_t h : hits) total += double(h);
    double pbar = total / (double(n) * double(x.size()));
    pbar = std::min(1.0 - 1e-9, std::max(1e-9, pbar));
    double a = std::log(pbar / (1.0 - pbar)), b = 0.0;
    for (int it = 0; it < 60; ++it) {
        double g0 = 0, g1 = 0, h00 = 0, h01 = 0, h11 = 0;
        for (size_t i = 0; i < x.size(); ++i) {
            double eta = a + b * x[i];
            double mu = 1.0 / (1.0 + std::exp(-eta));
            mu = std::min(1.0 - 1e-12, std::max(1e-12, mu));
            double w = double(n) * mu * (1.0 - mu);
            double r = double(hits[i]) - double(n) * mu;
            g0 += r;
            g1 += r * x[i];
            h00 += w;
            h01 += w * x[i];
            h11 += w * x[i] * x[i];
        }
        double det = h00 * h11 - h01 * h01;
        if (!(det > 1e-12)) break;
        double da = (h11 * g0 - h01 * g1) / det;
        double db = (h00 * g1 - h01 * g0) / det;
        a += da;
        b += db;
        a = std::min(500.0, std::max(-500.0, a));
        b = std::min(5000.0, std::max(-5000.0, b));
        if (std::fabs(da) + std::fabs(db) < 1e-10) break;
    }
    if (!std::isfinite(a) || !std::isfinite(b) || !(b > 1e-9)) return false;
    *beta0 = a;
    *beta1 = b;
    return true;
}

}  // namespace

SweepResult sweep_p(const ExperimentConfig& cfg, RngStream& rng, int threads) {
    const auto& grid = cfg.p_grid;
    if (grid.empty()) throw SpecError("sweep needs a nonempty p_grid");
    for (size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw SpecError("p_grid must be strictly increasing");
    const int64_t N = cfg.box;
    Rectangle region(0, N, 0, N);
    if (region.n_edges() > kMaxWindowEdges) throw SpecError("sweep box exceeds the window cap");
    const int64_t R = cfg.replicas;
    const size_t G = grid.size();

    // One environment and one uniform field per replica; rethresholding the
    // field walks the grid upward, so each replica's row is non-decreasing.
    std::vector<uint8_t> ind(size_t(R) * G, 0);
    parallel_for(R, threads, [&](int64_t r) {
        RngStream env_rng = rng.child(uint64_t(2 * r));
        RngStream field_rng = rng.child(uint64_t(2 * r + 1));
        EnvironmentWindow env =
            cfg.formulation == Formulation::dilute
                ? realize_to_horizon(cfg.spec, DelaySpec::dirac(0), double(N), env_rng)
                : realize_environment(cfg.spec, DelaySpec::dirac(0), N, env_rng);
        PercWindow w = sample_window(env, grid[0], region, cfg.formulation, field_rng);
        bool prev = false;
        for (size_t g = 0; g < G; ++g) {
            if (g) w.rethreshold(grid[g]);
            bool cur = crossing(w, region, 'h').indicator;
            if (prev && !cur)
                throw SpecError("sweep coupling lost monotonicity: crossing vanished as p grew");
            ind[size_t(r) * G + g] = cur ? 1 : 0;
            prev = cur;
        }
    });

    SweepResult res;
    std::vector<int64_t> hits(G, 0);
    for (int64_t r = 0; r < R; ++r)
        for (size_t g = 0; g < G; ++g) hits[g] += ind[size_t(r) * G + g];
    for (size_t g = 0; g < G; ++g) {
        SweepPoint pt;
        pt.p = grid[g];
        pt.hits = hits[g];
        pt.n = R;
        auto ci = wilson_ci(uint64_t(hits[g]), uint64_t(R), 3.0);
        pt.p_hat = double(hits[g]) / double(R);
        pt.ci_lo = ci.lo;
        pt.ci_hi = ci.hi;
        res.curve.push_back(pt);
    }

    double b0 = 0, b1 = 0;
    bool fit_ok = logistic_fit(grid, hits, R, &b0, &b1);
    if (fit_ok) res.pc_hat = -b0 / b1;
    res.pc_bracketed = fit_ok && res.curve.front().p_hat < 0.5 && res.curve.back().p_hat > 0.5 &&
                       res.pc_hat >= grid.front() && res.pc_hat <= grid.back();

    // Percentile bootstrap over replicas (each replica is one exchangeable
    // unit: its whole indicator row is resampled together).
    const int kBoot = 200;
    std::vector<double> pcs;
    RngStream boot = rng.child(uint64_t(1) << 32);
    for (int bidx = 0; bidx < kBoot; ++bidx) {
        std::vector<int64_t> bh(G, 0);
        for (int64_t r = 0; r < R; ++r) {
            auto pick = int64_t(boot.next_uniform() * double(R));
            if (pick >= R) pick = R - 1;
            for (size_t g = 0; g < G; ++g) bh[g] += ind[size_t(pick) * G + g];
        }
        double a = 0, b = 0;
        if (logistic_fit(grid, bh, R, &a, &b)) pcs.push_back(-a / b);
    }
    if (!pcs.empty() && fit_ok) {
        std::sort(pcs.begin(), pcs.end());
        res.pc_lo = pcs[size_t(std::floor(0.025 * double(pcs.size() - 1)))];
        res.pc_hi = pcs[size_t(std::ceil(0.975 * double(pcs.size() - 1)))];
    } else {
        res.pc_lo = res.pc_hi = res.pc_hat;
        res.pc_bracketed = false;
    }
    return res;
}

HeavyTailPlan heavy_tail_plan(double eta, std::vector<int64_t> i_k) {
    if (!(eta > 0.0 && eta < 1.0)) throw SpecError("heavy-tail plan needs eta in (0,1)");
    if (i_k.empty()) throw SpecError("heavy-tail plan needs at least one target index");
    for (size_t t = 0; t < i_k.size(); ++t) {
        if (i_k[t] < 1) throw SpecError("heavy-tail target indices start at 1");
        if (t && i_k[t] <= i_k[t - 1])
            throw SpecError("heavy-tail target indices must be strictly increasing");
    }
    HeavyTailPlan plan;
    plan.eta = eta;
    plan.epsilon_tail = (1.0 / eta - 1.0) / 2.0;
    plan.i_k = std::move(i_k);
    return plan;
}

double heavy_tail_row_count(double i, double epsilon_tail) {
    return std::ceil(std::exp(std::pow(i, 1.0 + epsilon_tail)));
}

double heavy_tail_bound_h(double i, double epsilon_tail, double p) {
    if (p <= 0.0) return 0.0;
    double rc = heavy_tail_row_count(i, epsilon_tail);
    double log_clear = std::pow(i, 1.0 + 2.0 * epsilon_tail) * std::log(p);
    if (std::isfinite(rc)) return rc * std::exp(log_clear);
    return std::exp(std::pow(i, 1.0 + epsilon_tail) + log_clear);
}

double heavy_tail_bound_v(double i, double epsilon_tail, double p) {
    if (p >= 1.0) return 1.0;
    double rc = heavy_tail_row_count(i, epsilon_tail);
    double expected_closed_rows = std::isfinite(rc)
                                      ? rc * std::exp(i * std::log1p(-p))
                                      : std::exp(std::pow(i, 1.0 + epsilon_tail) + i * std::log1p(-p));
    return std::exp(-expected_closed_rows);
}

HeavyTailResult heavy_tail_experiment(const InterarrivalSpec& spec, const HeavyTailPlan& plan,
                                      double p, int64_t n_samples,
                                      const std::vector<int64_t>& decay_N, int64_t decay_samples,
                                      RngStream& rng, int64_t horizon, int64_t cell_budget,
                                      int threads) {
    Moment m = check_moment(spec, plan.eta);
    if (m.finite)
        throw SpecError("heavy-tail demonstration needs an infinite moment of order " +
                        fmt_double(plan.eta) + "; this law has E(xi^eta) = " + fmt_double(m.value));
    if (!(p >= 0.0 && p <= 1.0)) throw SpecError("p must lie in [0,1]");
    if (n_samples < 1) throw SpecError("n_samples must be positive");
    double implied = 1.0 + 2.0 * plan.epsilon_tail;
    if (std::fabs(implied - 1.0 / plan.eta) > 1e-9)
        throw SpecError("plan is inconsistent: 1/eta must equal 1 + 2*epsilon_tail");

    HeavyTailResult res;
    res.plan = plan;
    res.p = p;

    RngStream env_rng = rng.child(0);
    EnvironmentWindow env =
        realize_environment(spec, DelaySpec::dirac(0), horizon, env_rng);
    const auto& gaps = env.gaps();
    const double tail_exp = 1.0 + 2.0 * plan.epsilon_tail;

    int64_t prev_found = 0;
    for (size_t t = 0; t < plan.i_k.size(); ++t) {
        int64_t start = std::max(plan.i_k[t], prev_found + 1);
        int64_t found = -1;
        for (int64_t i = start; i <= int64_t(gaps.size()); ++i) {
            if (gaps[size_t(i - 1)] > std::pow(double(i), tail_exp)) {
                found = i;
                break;
            }
        }
        if (found < 0)
            throw SpecError("plan index " + std::to_string(plan.i_k[t]) +
                            ": no gap exceeding i^(1+2*epsilon) found within the window horizon");
        prev_found = found;

        HeavyTailRow row;
        row.i = found;
        row.gap = gaps[size_t(found - 1)];
        row.row_count = heavy_tail_row_count(double(found), plan.epsilon_tail);
        row.b_h = heavy_tail_bound_h(double(found), plan.epsilon_tail, p);
        row.b_v = heavy_tail_bound_v(double(found), plan.epsilon_tail, p);
        row.b_h_vacuous = !(row.b_h <= 1.0);
        row.b_v_vacuous = !(row.b_v <= 1.0);
        double edge_count = 2.0 * double(found) * row.row_count;
        row.feasible = row.row_count <= 9.0e15 && edge_count <= double(cell_budget);
        if (row.feasible) {
            Rectangle box(0, found, 0, int64_t(row.row_count));
            row.n = n_samples;
            std::vector<uint8_t> hbits(size_t(n_samples), 0), vbits(size_t(n_samples), 0);
            uint64_t base = (uint64_t(t) + 1) << 32;
            parallel_for(n_samples, threads, [&](int64_t s) {
                RngStream hs = rng.child(base + uint64_t(2 * s));
                RngStream vs = rng.child(base + uint64_t(2 * s + 1));
                hbits[size_t(s)] =
                    streamed_crossing_sample(env, p, box, Formulation::inhomogeneous, 'h', hs);
                vbits[size_t(s)] =
                    streamed_crossing_sample(env, p, box, Formulation::inhomogeneous, 'v', vs);
            });
            for (int64_t s = 0; s < n_samples; ++s) {
                row.ch_hits += hbits[size_t(s)];
                row.cv_hits += vbits[size_t(s)];
            }
            row.ch_hi = wilson_ci(uint64_t(row.ch_hits), uint64_t(row.n), 3.0).hi;
            row.cv_hi = wilson_ci(uint64_t(row.cv_hits), uint64_t(row.n), 3.0).hi;
            row.h_bound_pass = row.b_h_vacuous || row.ch_hi <= row.b_h;
            row.v_bound_pass = row.b_v_vacuous || row.cv_hi <= row.b_v;
        }
        res.bounds_pass = res.bounds_pass && row.h_bound_pass && row.v_bound_pass;
        res.rows.push_back(row);
    }

    if (!decay_N.empty()) {
        for (size_t d = 0; d < decay_N.size(); ++d) {
            if (decay_N[d] < 1) throw SpecError("decay radii start at 1");
            if (d && decay_N[d] <= decay_N[d - 1])
                throw SpecError("decay radii must be strictly increasing");
        }
        if (decay_samples < 1) throw SpecError("decay_samples must be positive");
        const int64_t maxN = decay_N.back();
        Rectangle ambient(0, maxN, 0, maxN);
        const size_t D = decay_N.size();
        std::vector<uint8_t> bits(size_t(decay_samples) * D, 0);
        uint64_t dbase = (uint64_t(plan.i_k.size()) + 1) << 32;
        parallel_for(decay_samples, threads, [&](int64_t r) {
            RngStream er = rng.child(dbase + uint64_t(2 * r));
            RngStream cr = rng.child(dbase + uint64_t(2 * r + 1));
            // Physical box: [0,N]^2 in lattice coordinates, verticals only on
            // realized columns. An index box would keep a linearly growing
            // supply of columns near the origin and the probe would not decay.
            EnvironmentWindow e =
                realize_to_horizon(spec, DelaySpec::dirac(0), double(maxN), er);
            bool prev = true;
            for (size_t d = 0; d < D; ++d) {
                bool cur = streamed_origin_probe(e, p, ambient, Formulation::dilute,
                                                 decay_N[d], cr);
                if (cur && !prev)
                    throw SpecError("origin probe increased with N under one stream");
                bits[size_t(r) * D + d] = cur ? 1 : 0;
                prev = cur;
            }
        });
        res.decay_N = decay_N;
        res.decay_n = decay_samples;
        int64_t last = decay_samples;
        for (size_t d = 0; d < D; ++d) {
            int64_t h = 0;
            for (int64_t r = 0; r < decay_samples; ++r) h += bits[size_t(r) * D + d];
            res.decay_hits.push_back(h);
            res.decay_hat.push_back(double(h) / double(decay_samples));
            res.decay_hi.push_back(wilson_ci(uint64_t(h), uint64_t(decay_samples), 3.0).hi);
            res.monotone = res.monotone && h <= last;
            last = h;
        }
    }
    return res;
}

CertificateExperiment percolation_certificate_experiment(const InterarrivalSpec& spec,
                                                         const ScaleSystem& sys, double p, int k0,
                                                         int K, int64_t n_envs, int64_t n_cfgs,
                                                         int64_t n_trials, RngStream& rng,
                                                         int threads) {
    if (!(0 <= k0 && k0 <= K)) throw SpecError("certificate ladder needs 0 <= k0 <= K");
    if (K > sys.kmax()) throw SpecError("certificate ladder needs scales up to K in the system");
    if (sys.height_mode != HeightMode::desk)
        throw SpecError("certificate experiment needs the desk height schedule");
    if (!(p >= 0.0 && p <= 1.0)) throw SpecError("p must lie in [0,1]");
    if (n_trials < 1) throw SpecError("n_trials must be positive");

    CertificateExperiment ex;
    ex.k0 = k0;
    ex.K = K;
    ex.p = p;
    ex.n = n_trials;

    for (int k = k0; k <= K; ++k) {
        RngStream qrng = rng.child(uint64_t(k) + 1);
        QkEstimate qe = estimate_qk(spec, sys, p, k, n_envs, n_cfgs, qrng);
        ex.qk.push_back(qe.qk_hat);
        ex.qk_hi.push_back(std::max(qe.worst_c_hi, qe.worst_d_hi));
    }
    ex.bound = 1.0;
    ex.bound_conservative = 1.0;
    for (int k = k0; k <= K; ++k) {
        double cnt = double(sys.ratio_int(k) - 1);
        ex.bound *= std::pow(std::max(0.0, 1.0 - 2.0 * ex.qk[size_t(k - k0)]), cnt);
        ex.bound_conservative *=
            std::pow(std::max(0.0, 1.0 - 2.0 * ex.qk_hi[size_t(k - k0)]), cnt);
    }

    Rectangle region = ladder_window_region(sys, K);
    if (region.n_edges() > kMaxWindowEdges)
        throw SpecError("ladder region exceeds the window cap");
    std::vector<uint8_t> cert(size_t(n_trials), 0), conn(size_t(n_trials), 0),
        viol(size_t(n_trials), 0);
    uint64_t base = uint64_t(1) << 32;
    parallel_for(n_trials, threads, [&](int64_t t) {
        RngStream er = rng.child(base + uint64_t(2 * t));
        RngStream cr = rng.child(base + uint64_t(2 * t + 1));
        EnvironmentWindow env =
            realize_to_horizon(spec, DelaySpec::stationary(), double(region.b), er);
        PercWindow w = sample_window(env, p, region, Formulation::dilute, cr);
        LadderReport rep = ladder_certificate(w, sys, k0, K);
        cert[size_t(t)] = rep.certificate ? 1 : 0;
        conn[size_t(t)] = rep.connectivity ? 1 : 0;
        viol[size_t(t)] = (rep.certificate && !rep.connectivity) ? 1 : 0;
    });
    for (int64_t t = 0; t < n_trials; ++t) {
        ex.cert_hits += cert[size_t(t)];
        ex.conn_hits += conn[size_t(t)];
        ex.violations += viol[size_t(t)];
    }
    ex.cert_hat = double(ex.cert_hits) / double(ex.n);
    // FKG puts the true frequency at or above the product bound; the measured
    // frequency only has to reach the conservative bound within noise.
    ex.fkg_consistent =
        wilson_ci(uint64_t(ex.cert_hits), uint64_t(ex.n), 3.0).hi >= ex.bound_conservative;
    return ex;
}

DecouplingPkAudit audit_decoupling_and_pk(const InterarrivalSpec& spec, const ScaleSystem& sys,
                                          int kmax, int64_t n_samples, RngStream& rng) {
    if (kmax < 0 || kmax > sys.kmax()) throw SpecError("audit kmax outside the ladder");
    if (n_samples < 1) throw SpecError("n_samples must be positive");

    DecouplingPkAudit audit;
    CylinderEvent arrival = CylinderEvent::renewal_at();
    std::vector<int64_t> separations = {1, 2, 4, 8, 16, 32, 64};
    RngStream c1_rng = rng.child(1);
    audit.c1 = estimate_c1(spec, arrival, arrival, 96, separations, sys.params.epsilon, n_samples,
                           c1_rng);
    double c1_hat = std::max(audit.c1.c_fit, 0.0);

    for (int k = 0; k <= kmax; ++k) {
        RngStream pk_rng = rng.child(uint64_t(2 + k));
        audit.pk.push_back(estimate_pk(spec, sys, k, n_samples, pk_rng));
    }
    audit.p0_bound_pass = audit.pk[0].bound_pass;

    if (spec.integer_valued() && spec.mean().finite) {
        double tail = 0.0;
        stationary_delay_pmf(spec, sys.L0, &tail);
        audit.p0_exact = tail;  // block 0 is bad iff the stationary delay exceeds L0
        audit.p0_matches_exact =
            audit.pk[0].ci_lo <= tail + 1e-12 && tail <= audit.pk[0].ci_hi + 1e-12;
    }

    for (int k = 0; k + 1 <= kmax; ++k) {
        RecursionAudit ra;
        ra.k = k;
        ra.recursion = pk_recursion_check(sys, k, audit.pk[size_t(k)], audit.pk[size_t(k) + 1],
                                          c1_hat);
        double Lk = double(sys.L_int(k));
        ra.closed_form_bound =
            (1.0 + c1_hat) * std::pow(Lk, 2.0 * sys.params.gamma - 2.0 - 2.0 * sys.params.alpha);
        ra.closed_form_pass = audit.pk[size_t(k) + 1].ci_lo <= ra.closed_form_bound + 1e-12;
        audit.recursion.push_back(ra);
    }

    audit.all_pass = audit.p0_bound_pass && audit.p0_matches_exact;
    for (const auto& ra : audit.recursion) audit.all_pass = audit.all_pass && ra.closed_form_pass;
    return audit;
}

namespace {

using nlohmann::json;

std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
    return buf;
}

std::string now_iso() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

json sweep_json(const SweepResult& r) {
    json j;
    json curve = json::array();
    for (const auto& pt : r.curve) {
        curve.push_back({{"p", pt.p},
                         {"hits", pt.hits},
                         {"n", pt.n},
                         {"p_hat", pt.p_hat},
                         {"ci_lo", pt.ci_lo},
                         {"ci_hi", pt.ci_hi}});
    }
    j["curve"] = curve;
    j["pc_hat"] = r.pc_hat;
    j["pc_lo"] = r.pc_lo;
    j["pc_hi"] = r.pc_hi;
    j["pc_bracketed"] = r.pc_bracketed;
    return j;
}

json heavy_json(const HeavyTailResult& r) {
    json j;
    j["eta"] = r.plan.eta;
    j["epsilon_tail"] = r.plan.epsilon_tail;
    j["p"] = r.p;
    json rows = json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"i", row.i},
                        {"gap", row.gap},
                        {"row_count", row.row_count},
                        {"b_h", row.b_h},
                        {"b_v", row.b_v},
                        {"b_h_vacuous", row.b_h_vacuous},
                        {"b_v_vacuous", row.b_v_vacuous},
                        {"feasible", row.feasible},
                        {"n", row.n},
                        {"ch_hits", row.ch_hits},
                        {"cv_hits", row.cv_hits},
                        {"ch_hi", row.ch_hi},
                        {"cv_hi", row.cv_hi},
                        {"h_bound_pass", row.h_bound_pass},
                        {"v_bound_pass", row.v_bound_pass}});
    }
    j["rows"] = rows;
    j["decay_N"] = r.decay_N;
    j["decay_hits"] = r.decay_hits;
    j["decay_hat"] = r.decay_hat;
    j["decay_hi"] = r.decay_hi;
    j["decay_n"] = r.decay_n;
    j["monotone"] = r.monotone;
    j["bounds_pass"] = r.bounds_pass;
    return j;
}

json cert_json(const CertificateExperiment& e) {
    json j;
    j["k0"] = e.k0;
    j["K"] = e.K;
    j["p"] = e.p;
    j["n"] = e.n;
    j["cert_hits"] = e.cert_hits;
    j["conn_hits"] = e.conn_hits;
    j["violations"] = e.violations;
    j["cert_hat"] = e.cert_hat;
    j["qk"] = e.qk;
    j["qk_hi"] = e.qk_hi;
    j["bound"] = e.bound;
    j["bound_conservative"] = e.bound_conservative;
    j["fkg_consistent"] = e.fkg_consistent;
    return j;
}

json audit_json(const DecouplingPkAudit& a) {
    json j;
    j["c_fit"] = a.c1.c_fit;
    j["c_fit_mc"] = a.c1.c_fit_mc;
    j["c_paper"] = a.c1.c_paper;
    json pks = json::array();
    for (const auto& pk : a.pk) {
        pks.push_back({{"k", pk.k},
                       {"n", pk.n_samples},
                       {"bad", pk.n_bad},
                       {"p_hat", pk.p_hat},
                       {"ci_lo", pk.ci_lo},
                       {"ci_hi", pk.ci_hi},
                       {"log10_bound", pk.log10_bound},
                       {"bound_pass", pk.bound_pass}});
    }
    j["pk"] = pks;
    json recs = json::array();
    for (const auto& ra : a.recursion) {
        recs.push_back({{"k", ra.k},
                        {"lhs", ra.recursion.lhs},
                        {"rhs", ra.recursion.rhs},
                        {"holds", ra.recursion.holds},
                        {"closed_form_bound", ra.closed_form_bound},
                        {"closed_form_pass", ra.closed_form_pass}});
    }
    j["recursion"] = recs;
    j["p0_exact"] = a.p0_exact;
    j["p0_matches_exact"] = a.p0_matches_exact;
    j["p0_bound_pass"] = a.p0_bound_pass;
    j["all_pass"] = a.all_pass;
    return j;
}

ScaleParams params_from_config(const ExperimentConfig& cfg, bool waived) {
    double e = cfg.kv.has("epsilon") ? cfg.kv.get_double("epsilon") : 1.0;
    double a = cfg.kv.has("alpha") ? cfg.kv.get_double("alpha") : 0.5;
    double g = cfg.kv.has("gamma") ? cfg.kv.get_double("gamma") : 1.2;
    double mu = cfg.kv.has("mu") ? cfg.kv.get_double("mu") : 0.5;
    double b = cfg.kv.has("beta") ? cfg.kv.get_double("beta") : 0.9;
    return waived ? params_relaxed(e, a, g, mu, b) : validate_params(e, a, g, mu, b);
}

}  // namespace

RunRecord run(const ExperimentConfig& cfg, int threads) {
    if (threads <= 0) threads = cfg.threads;
    RunRecord rec;
    rec.config_hash = cfg.config_hash();
    rec.started_at = now_iso();
    const std::string hhex = hash_hex(rec.config_hash);

    // Resume: collect lines already persisted for this exact config.
    bool have_header = false;
    std::map<int64_t, std::string> done;
    if (!cfg.out.empty()) {
        std::ifstream in(cfg.out);
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded()) throw SpecError("run output file holds a non-JSON line");
            if (j.value("hash", std::string()) != hhex) continue;
            std::string kind = j.value("kind", std::string());
            if (kind == "config") have_header = true;
            if (kind == "task" && j.contains("seq")) done[j["seq"].get<int64_t>()] = line;
        }
    }
    std::ofstream out;
    if (!cfg.out.empty()) out.open(cfg.out, std::ios::app);
    auto emit = [&](const std::string& line, bool already_persisted) {
        rec.lines.push_back(line);
        if (already_persisted) {
            ++rec.reused;
            return;
        }
        if (out.is_open()) {
            out << line << "\n";
            out.flush();
        }
    };

    json header;
    header["hash"] = hhex;
    header["kind"] = "config";
    emit(header.dump(), have_header);

    bool waived = cfg.kv.has("waive_validation") && cfg.kv.get_int("waive_validation") == 1;
    for (size_t i = 0; i < cfg.tasks.size(); ++i) {
        auto it = done.find(int64_t(i));
        if (it != done.end()) {
            emit(it->second, true);
            continue;
        }
        const std::string& task = cfg.tasks[i];
        json j;
        j["hash"] = hhex;
        j["kind"] = "task";
        j["seq"] = int64_t(i);
        j["task"] = task;
        j["seed"] = cfg.seed;
        j["stream"] = int64_t(i);
        RngStream task_rng(cfg.seed, uint64_t(i));
        if (task == "sweep") {
            j["result"] = sweep_json(sweep_p(cfg, task_rng, threads));
        } else if (task == "heavytail") {
            double eta = cfg.kv.has("ht_eta") ? cfg.kv.get_double("ht_eta") : 0.5;
            auto ik = parse_int_list(cfg.kv.get_or("ht_ik", "2,3"));
            HeavyTailPlan plan = heavy_tail_plan(eta, ik);
            double p = cfg.kv.has("ht_p") ? cfg.kv.get_double("ht_p") : 0.5;
            int64_t n = cfg.kv.has("ht_samples") ? cfg.kv.get_int("ht_samples") : 2000;
            int64_t horizon = cfg.kv.has("ht_horizon") ? cfg.kv.get_int("ht_horizon") : 100000;
            auto dN = parse_int_list(cfg.kv.get_or("ht_decay_n", ""));
            int64_t dn = cfg.kv.has("ht_decay_samples") ? cfg.kv.get_int("ht_decay_samples") : 1000;
            int64_t budget = cfg.kv.has("ht_budget") ? cfg.kv.get_int("ht_budget") : 100000000;
            j["result"] = heavy_json(
                heavy_tail_experiment(cfg.spec, plan, p, n, dN, dn, task_rng, horizon, budget,
                                      threads));
        } else if (task == "certificate") {
            ScaleParams params = params_from_config(cfg, waived);
            int64_t L0 = cfg.kv.has("L0") ? cfg.kv.get_int("L0") : 2;
            int64_t h = cfg.kv.has("desk_h") ? cfg.kv.get_int("desk_h") : 1;
            int k0 = cfg.kv.has("cert_k0") ? int(cfg.kv.get_int("cert_k0")) : 0;
            int K = cfg.kv.has("cert_K") ? int(cfg.kv.get_int("cert_K")) : 1;
            ScaleSystem sys;
            if (cfg.kv.has("cert_ratios")) {
                sys = scales_from_explicit(params, L0, parse_int_list(cfg.kv.get("cert_ratios")),
                                           HeightMode::desk, h);
            } else {
                sys = build_scales(params, L0, K + 1, HeightMode::desk, h);
            }
            double p = cfg.kv.has("cert_p") ? cfg.kv.get_double("cert_p") : 0.95;
            int64_t ne = cfg.kv.has("cert_envs") ? cfg.kv.get_int("cert_envs") : 3;
            int64_t nc = cfg.kv.has("cert_cfgs") ? cfg.kv.get_int("cert_cfgs") : 300;
            int64_t nt = cfg.kv.has("cert_trials") ? cfg.kv.get_int("cert_trials") : 1000;
            j["result"] = cert_json(percolation_certificate_experiment(cfg.spec, sys, p, k0, K, ne,
                                                                       nc, nt, task_rng, threads));
        } else if (task == "audit") {
            ScaleParams params = params_from_config(cfg, waived);
            int64_t L0 = cfg.kv.has("L0") ? cfg.kv.get_int("L0") : 244;
            int kmax = cfg.kv.has("audit_kmax") ? int(cfg.kv.get_int("audit_kmax")) : 1;
            int64_t n = cfg.kv.has("audit_samples") ? cfg.kv.get_int("audit_samples") : 20000;
            ScaleSystem sys = build_scales(params, L0, std::max(kmax, 1), HeightMode::desk);
            if (!waived) {
                Moment rho_eps = check_moment(cfg.spec, params.epsilon);
                double c1_upper = cfg.kv.has("c1_upper") ? cfg.kv.get_double("c1_upper") : 2.0;
                if (!rho_eps.finite)
                    throw SpecError("audit needs a finite epsilon-th gap moment (or a waiver)");
                L0Check chk = validate_L0(params, L0, rho_eps.value, c1_upper);
                if (!chk.pass())
                    throw SpecError("L0 fails its admissibility checks (set waive_validation = 1 "
                                    "to run anyway); minimal passing L0 is " +
                                    std::to_string(chk.minimal_L0));
            }
            j["result"] = audit_json(audit_decoupling_and_pk(cfg.spec, sys, kmax, n, task_rng));
        } else {
            throw SpecError("unknown task: " + task);
        }
        emit(j.dump(), false);
    }
    rec.finished_at = now_iso();
    return rec;
}

}  // namespace stretchperc
