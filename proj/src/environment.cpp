#include "stretchperc/environment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stretchperc {

std::vector<double> EnvironmentWindow::gaps() const {
    std::vector<double> g;
    g.reserve(columns.size() > 0 ? columns.size() - 1 : 0);
    for (size_t i = 1; i < columns.size(); ++i) g.push_back(columns[i] - columns[i - 1]);
    return g;
}

bool EnvironmentWindow::any_column_in(double lo, double hi) const {
    auto it = std::lower_bound(columns.begin(), columns.end(), lo);
    return it != columns.end() && *it <= hi;
}

int64_t EnvironmentWindow::count_in(double lo, double hi) const {
    auto lo_it = std::lower_bound(columns.begin(), columns.end(), lo);
    auto hi_it = std::upper_bound(columns.begin(), columns.end(), hi);
    return hi_it - lo_it;
}

size_t EnvironmentWindow::lower_index(double x) const {
    return std::lower_bound(columns.begin(), columns.end(), x) - columns.begin();
}

bool EnvironmentWindow::has_column_at(double x) const {
    auto it = std::lower_bound(columns.begin(), columns.end(), x);
    return it != columns.end() && *it == x;
}

EnvironmentWindow environment_from_gaps(double delay, const std::vector<double>& gaps) {
    EnvironmentWindow env;
    env.columns.reserve(gaps.size() + 1);
    env.columns.push_back(delay);
    for (double g : gaps) {
        if (!(g > 0)) throw std::runtime_error("gaps must be positive");
        env.columns.push_back(env.columns.back() + g);
    }
    env.integer_valued = std::all_of(env.columns.begin(), env.columns.end(), [](double x) {
        return std::fabs(x - std::round(x)) < 1e-9;
    });
    return env;
}

EnvironmentWindow realize_environment(const InterarrivalSpec& spec, const DelaySpec& delay,
                                      size_t n_gaps, RngStream& rng) {
    EnvironmentWindow env;
    env.columns.reserve(n_gaps + 1);
    env.columns.push_back(delay.sample(spec, rng));
    while (env.columns.size() < n_gaps + 1)
        env.columns.push_back(env.columns.back() + spec.sample(rng));
    env.integer_valued = spec.integer_valued() &&
                         std::fabs(env.columns[0] - std::round(env.columns[0])) < 1e-9;
    return env;
}

EnvironmentWindow realize_to_horizon(const InterarrivalSpec& spec, const DelaySpec& delay,
                                     double horizon, RngStream& rng) {
    EnvironmentWindow env;
    env.columns.push_back(delay.sample(spec, rng));
    while (env.columns.back() < horizon)
        env.columns.push_back(env.columns.back() + spec.sample(rng));
    env.integer_valued = spec.integer_valued() &&
                         std::fabs(env.columns[0] - std::round(env.columns[0])) < 1e-9;
    return env;
}

}  // namespace stretchperc
