#pragma once
#include <cstdint>
#include <vector>

#include "stretchperc/interarrival.hpp"
#include "stretchperc/rng.hpp"

namespace stretchperc {

// One realized environment: column positions x_0 <= x_1 <= ... where
// x_0 is the delay and x_i = x_{i-1} + xi_i.
struct EnvironmentWindow {
    std::vector<double> columns;
    bool integer_valued = false;

    double delay() const { return columns.front(); }
    double max_column() const { return columns.back(); }
    size_t count() const { return columns.size(); }

    std::vector<double> gaps() const;

    // any column in the closed interval [lo, hi]
    bool any_column_in(double lo, double hi) const;
    // number of columns in [lo, hi]
    int64_t count_in(double lo, double hi) const;
    // index of first column >= x, or count() if none
    size_t lower_index(double x) const;
    bool has_column_at(double x) const;
};

EnvironmentWindow environment_from_gaps(double delay, const std::vector<double>& gaps);

// Realize the delay column plus n_gaps further columns (n_gaps + 1 total).
EnvironmentWindow realize_environment(const InterarrivalSpec& spec, const DelaySpec& delay,
                                      size_t n_gaps, RngStream& rng);

// Realize columns until one lands at or beyond horizon (that column included).
EnvironmentWindow realize_to_horizon(const InterarrivalSpec& spec, const DelaySpec& delay,
                                     double horizon, RngStream& rng);

}  // namespace stretchperc
