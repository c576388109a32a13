#pragma once
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stretchperc/rng.hpp"

namespace stretchperc {

enum class GapKind { deterministic, geometric, zeta, finite_pmf, scaled };

struct Moment {
    bool finite = true;
    double value = 0;  // meaningful only when finite
};

// Distribution of one positive interarrival gap. Values are positive reals;
// geometric and zeta live on {1,2,...}.
class InterarrivalSpec {
public:
    static InterarrivalSpec deterministic(double v);
    static InterarrivalSpec geometric(double q);
    static InterarrivalSpec zeta(double s);
    static InterarrivalSpec finite_pmf(std::vector<std::pair<double, double>> value_prob);
    static InterarrivalSpec scaled(InterarrivalSpec inner, double multiplier);

    GapKind kind() const { return kind_; }
    double det_value() const { return a_; }
    double geo_q() const { return a_; }
    double zeta_s() const { return a_; }
    double multiplier() const { return a_; }
    const InterarrivalSpec& inner() const { return *inner_; }
    const std::vector<std::pair<double, double>>& table() const { return table_; }

    double sample(RngStream& rng) const;
    int64_t sample_int(RngStream& rng) const;  // pre: integer_valued()

    bool integer_valued() const;
    Moment moment(double eta) const;  // E(xi^eta)
    Moment mean() const { return moment(1.0); }

    // integer-valued specs
    double pmf_int(int64_t k) const;       // P(xi = k)
    double survival_int(int64_t k) const;  // P(xi > k)
    std::optional<int64_t> max_support_int() const;
    bool is_aperiodic(int64_t* period = nullptr) const;

    double survival_geq(double t) const;  // P(xi >= t), any spec

    std::string compact() const;                            // e.g. "geometric:0.5"
    static InterarrivalSpec parse_compact(const std::string& text);
    std::string serialize() const;                          // flat key = value block
    static InterarrivalSpec parse(const std::string& text);

private:
    InterarrivalSpec() = default;
    GapKind kind_ = GapKind::deterministic;
    double a_ = 1;  // det value / geometric q / zeta s / scale multiplier
    std::vector<std::pair<double, double>> table_;  // finite_pmf, sorted by value
    std::vector<double> cdf_;                       // finite_pmf
    std::shared_ptr<const InterarrivalSpec> inner_;  // scaled
    // zeta internals
    std::shared_ptr<const struct ZetaTable> zt_;
};

// Sum_{k>K} k^{-s} with certified relative error; exposed for tests.
long double zeta_tail(double s, int64_t K);

inline Moment check_moment(const InterarrivalSpec& spec, double eta) { return spec.moment(eta); }

// Delay (first column position) distribution.
class DelaySpec {
public:
    enum class Kind { dirac, stationary, explicit_pmf };
    static DelaySpec dirac(double v);
    static DelaySpec stationary();
    static DelaySpec explicit_pmf(std::vector<double> probs);  // over {0,1,2,...}

    Kind kind() const { return kind_; }
    double dirac_value() const { return v_; }
    const std::vector<double>& probs() const { return probs_; }

    // pre for stationary: integer-valued spec with finite mean
    double sample(const InterarrivalSpec& spec, RngStream& rng) const;

    std::string compact() const;
    static DelaySpec parse_compact(const std::string& text);

private:
    Kind kind_ = Kind::dirac;
    double v_ = 0;
    std::vector<double> probs_;
};

// rho_k for k = 0..kmax; optionally reports the mass beyond kmax.
std::vector<double> stationary_delay_pmf(const InterarrivalSpec& spec, int64_t kmax,
                                         double* tail_mass = nullptr);

struct AperiodicReduction {
    InterarrivalSpec reduced;
    int64_t m;  // period divided out; percolation parameter transports as p -> p^(1/m)
};
AperiodicReduction reduce_to_aperiodic(const InterarrivalSpec& spec);

struct SpecError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace stretchperc
