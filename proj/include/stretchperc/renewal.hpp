#pragma once
#include <cstdint>
#include <vector>

#include "stretchperc/environment.hpp"
#include "stretchperc/interarrival.hpp"
#include "stretchperc/rng.hpp"

namespace stretchperc {

// Integer renewal process on {0, 1, ..., horizon}. Y[t] marks an arrival at t,
// Z[t] is the distance from t to the next arrival at or after t.
struct RenewalTrajectory {
    int64_t horizon = 0;
    std::vector<int64_t> arrivals;  // realized arrivals; last one >= horizon
    std::vector<uint8_t> Y;         // size horizon + 1
    std::vector<int64_t> Z;         // size horizon + 1
};

RenewalTrajectory trajectory_from_arrivals(std::vector<int64_t> arrivals, int64_t horizon);
RenewalTrajectory sample_renewal(const InterarrivalSpec& spec, const DelaySpec& delay,
                                 int64_t horizon, RngStream& rng);

// Finite pattern of renewal-indicator bits at nonpositive offsets from an anchor.
struct CylinderEvent {
    std::vector<std::pair<int64_t, bool>> bits;  // (offset <= 0, required Y value)

    int64_t width() const;
    bool eval(const RenewalTrajectory& tr, int64_t anchor) const;

    static CylinderEvent renewal_at();  // {Y_anchor = 1}
    static CylinderEvent pattern(std::vector<std::pair<int64_t, bool>> bits);
};

// P(Y_{t_j} = b_j for all j) with stationary start; finite-support laws only.
double exact_cylinder_prob(const InterarrivalSpec& spec,
                           std::vector<std::pair<int64_t, bool>> constraints);
// Cov(1_A at anchor_a, 1_B at anchor_a + n) under stationarity, exact.
double exact_cylinder_gap(const InterarrivalSpec& spec, const CylinderEvent& A,
                          const CylinderEvent& B, int64_t n);

struct CouplingSample {
    int64_t value;
    bool censored;
};
// First common arrival >= 1 of two independent copies; censored at cap.
CouplingSample sample_coupling_time(const InterarrivalSpec& spec, const DelaySpec& d1,
                                    const DelaySpec& d2, int64_t cap, RngStream& rng);
// P(T > n) exact; finite-support laws (product chain) and geometric (closed form).
double coupling_tail_exact(const InterarrivalSpec& spec, const DelaySpec& d1, const DelaySpec& d2,
                           int64_t n);
bool coupling_tail_is_exact(const InterarrivalSpec& spec, const DelaySpec& d1,
                            const DelaySpec& d2);

struct DecouplingPoint {
    int64_t n;
    double gap;         // covariance estimate at separation n
    double half_width;  // ~3 sigma on the MC estimate
    bool exact = false;
    double exact_gap = 0;
};

struct DecouplingEstimate {
    double epsilon = 0;
    double p_a = 0, p_b = 0;
    double c_fit = 0;     // max over separations of |gap(n)| * n^epsilon (exact gap if known)
    double c_fit_mc = 0;  // same from the raw Monte Carlo gaps
    double c_paper = 0;   // 2^epsilon * (E rho^epsilon + E T^epsilon)
    double e_rho_eps = 0, e_t_eps = 0;
    double censor_frac = 0;
    bool exact_gaps = false;
    bool exact_t_moment = false;
    std::vector<DecouplingPoint> points;
};

DecouplingEstimate estimate_c1(const InterarrivalSpec& spec, const CylinderEvent& A,
                               const CylinderEvent& B, int64_t anchor,
                               const std::vector<int64_t>& separations, double epsilon,
                               int64_t n_samples, RngStream& rng);

struct StationarityReport {
    double tv = 0;
    double threshold = 0;
    int64_t cells = 0;
    bool pass = false;
};
// Total variation distance between the law of (Y_m..Y_{m+window}) and
// (Y_0..Y_window) under stationary start, from two independent sample sets.
StationarityReport shift_stationarity_check(const InterarrivalSpec& spec, int64_t m, int window,
                                            int64_t n_samples, RngStream& rng);

}  // namespace stretchperc
