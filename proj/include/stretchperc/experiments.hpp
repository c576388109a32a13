#pragma once
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stretchperc/interarrival.hpp"
#include "stretchperc/io.hpp"
#include "stretchperc/lattice.hpp"
#include "stretchperc/renewal.hpp"
#include "stretchperc/rng.hpp"
#include "stretchperc/scales.hpp"

namespace stretchperc {

// Deterministic fan-out over independent work items. body(i) must write only
// to its own slot of preallocated storage and draw randomness from streams
// keyed by i alone, so any thread count (including 1) produces bit-identical
// results; the first exception thrown by a worker is rethrown after join.
void parallel_for(int64_t n, int threads, const std::function<void(int64_t)>& body);

// Experiment configuration, parsed from a flat key = value block. Common keys:
//   spec         gap law in compact form (geometric:0.5, det:1, zeta:1.5)
//   formulation  stretched_lengths | inhomogeneous | dilute
//   p_grid       comma-separated parameters for sweeps
//   box          N of the N x N sweep window
//   replicas     per-grid-point replica count
//   seed         master seed (the CLI can override via flag or environment)
//   threads      worker count (results do not depend on it)
//   tasks        comma list from {sweep, heavytail, certificate, audit}
//   out          JSON-lines output path ("" keeps the record in memory)
// Task-specific keys are read by the task runners; unknown keys are rejected
// at parse time so typos cannot silently change an experiment. Validation of
// scale parameters may be waived with waive_validation = 1, which is itself
// part of the hashed config.
struct ExperimentConfig {
    KvBlock kv;
    InterarrivalSpec spec = InterarrivalSpec::geometric(0.5);
    Formulation formulation = Formulation::inhomogeneous;
    std::vector<double> p_grid;
    int64_t box = 32;
    int64_t replicas = 200;
    uint64_t seed = 0;
    int threads = 1;
    std::vector<std::string> tasks;
    std::string out;

    uint64_t config_hash() const { return kv.hash(); }
};
ExperimentConfig parse_config(const std::string& text);

struct SweepPoint {
    double p = 0;
    int64_t hits = 0, n = 0;
    double p_hat = 0, ci_lo = 0, ci_hi = 0;  // Wilson, z = 3
};
struct SweepResult {
    std::vector<SweepPoint> curve;  // non-decreasing in p (shared uniforms)
    double pc_hat = 0;              // logistic fit crossing 1/2
    double pc_lo = 0, pc_hi = 0;    // bootstrap percentile interval
    bool pc_bracketed = false;      // curve straddles 1/2 with a rising fit
};
// Estimates P(C_h of the box) on each grid p. One environment and one uniform
// field per replica; the field is rethresholded across the grid, so each
// replica's indicator row is non-decreasing in p (asserted). Environments are
// anchored by a renewal at the origin.
SweepResult sweep_p(const ExperimentConfig& cfg, RngStream& rng, int threads = 1);

// Heavy-tail demonstration plan. epsilon_tail satisfies 1/eta = 1 + 2 *
// epsilon_tail; i_k are requested positions of the huge-gap subsequence (the
// experiment searches forward from each for an index i whose realized gap
// exceeds i^{1 + 2 epsilon_tail}).
struct HeavyTailPlan {
    double eta = 0.5;
    double epsilon_tail = 0.5;
    std::vector<int64_t> i_k;
};
HeavyTailPlan heavy_tail_plan(double eta, std::vector<int64_t> i_k);

// ceil(exp(i^{1 + epsilon_tail})) rows; the closed-form crossing bounds
//   b_h = row_count * p^{i^{1 + 2 epsilon_tail}}   (one row must clear the gap)
//   b_v = exp(-row_count * (1-p)^i)                (some row closes entirely)
double heavy_tail_row_count(double i, double epsilon_tail);
double heavy_tail_bound_h(double i, double epsilon_tail, double p);
double heavy_tail_bound_v(double i, double epsilon_tail, double p);

struct HeavyTailRow {
    int64_t i = 0;          // found index with gap > i^{1 + 2 epsilon_tail}
    double gap = 0;         // the realized gap there
    double row_count = 0;   // box height (exact ceil while it fits a double)
    double b_h = 1, b_v = 1;
    bool b_h_vacuous = true, b_v_vacuous = true;  // bound > 1
    bool feasible = false;  // box fits the cell budget, so it was sampled
    int64_t n = 0, ch_hits = 0, cv_hits = 0;
    double ch_hi = 1, cv_hi = 1;                    // Wilson upper, z = 3
    bool h_bound_pass = true, v_bound_pass = true;  // upper CI <= nonvacuous bound
};
struct HeavyTailResult {
    HeavyTailPlan plan;
    double p = 0;
    std::vector<HeavyTailRow> rows;
    std::vector<int64_t> decay_N;
    std::vector<int64_t> decay_hits;
    std::vector<double> decay_hat, decay_hi;
    int64_t decay_n = 0;
    bool monotone = true;     // per-replica indicators non-increasing in N
    bool bounds_pass = true;  // every nonvacuous bound dominates its CI
};
// Samples one long environment, finds the huge-gap subsequence, estimates
// crossing probabilities of the R boxes that fit the cell budget (bound-only
// rows otherwise), and traces P(o reaches the distance-N ring) over fresh
// environments with nested per-replica windows. The gap law must have an
// infinite eta-th moment. Boxes live on column indices (direct formulation).
HeavyTailResult heavy_tail_experiment(const InterarrivalSpec& spec, const HeavyTailPlan& plan,
                                      double p, int64_t n_samples,
                                      const std::vector<int64_t>& decay_N, int64_t decay_samples,
                                      RngStream& rng, int64_t horizon = 100000,
                                      int64_t cell_budget = 100000000, int threads = 1);

struct CertificateExperiment {
    int k0 = 0, K = 0;
    double p = 0;
    int64_t n = 0;
    int64_t cert_hits = 0, conn_hits = 0, violations = 0;
    double cert_hat = 0;
    std::vector<double> qk;          // measured q_k, scales k0..K
    std::vector<double> qk_hi;       // their Wilson upper bounds
    double bound = 0;                // prod (1 - 2 qk)^(ratio_k - 1)
    double bound_conservative = 0;   // same with the upper CIs
    bool fkg_consistent = false;     // cert_hat >= bound_conservative - 3 sigma
};
// Measures the frequency of the ladder certificate, audits the implication
// certificate => connectivity on every trial, and compares the frequency with
// the product-form lower bound computed from measured q_k.
CertificateExperiment percolation_certificate_experiment(const InterarrivalSpec& spec,
                                                         const ScaleSystem& sys, double p, int k0,
                                                         int K, int64_t n_envs, int64_t n_cfgs,
                                                         int64_t n_trials, RngStream& rng,
                                                         int threads = 1);

struct RecursionAudit {
    int k = 0;
    PkRecursionCheck recursion;    // one-step bound with measured c1
    double closed_form_bound = 0;  // (1 + c1) L_k^{2 gamma - 2 - 2 alpha}
    bool closed_form_pass = false;
};
struct DecouplingPkAudit {
    DecouplingEstimate c1;
    std::vector<PkEstimate> pk;           // k = 0..kmax
    std::vector<RecursionAudit> recursion;  // k = 0..kmax-1
    double p0_exact = -1;    // stationary-pmf tail when the law allows it
    bool p0_matches_exact = true;
    bool p0_bound_pass = false;  // pk[0] upper CI <= L0^{-alpha}
    bool all_pass = false;
};
DecouplingPkAudit audit_decoupling_and_pk(const InterarrivalSpec& spec, const ScaleSystem& sys,
                                          int kmax, int64_t n_samples, RngStream& rng);

// Persisted run: one JSON line per completed task, all numeric content a pure
// function of (config, seed). Wall-clock timestamps stay on the record struct
// and never enter the persisted lines, which keeps reruns byte-identical.
struct RunRecord {
    uint64_t config_hash = 0;
    std::vector<std::string> lines;
    std::string started_at, finished_at;
    int64_t reused = 0;  // lines recovered from an earlier partial run
};
// Executes cfg.tasks in order. With a nonempty cfg.out, lines are appended to
// the file as they complete; rerunning resumes after any lines already
// present for this config hash.
RunRecord run(const ExperimentConfig& cfg, int threads = 0);  // 0: cfg.threads

}  // namespace stretchperc
