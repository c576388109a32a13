#include "stretchperc/renewal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace stretchperc {

RenewalTrajectory trajectory_from_arrivals(std::vector<int64_t> arrivals, int64_t horizon) {
    if (arrivals.empty() || arrivals.back() < horizon)
        throw std::runtime_error("arrivals must reach the horizon");
    if (!std::is_sorted(arrivals.begin(), arrivals.end()))
        throw std::runtime_error("arrivals must be sorted");
    RenewalTrajectory tr;
    tr.horizon = horizon;
    tr.Y.assign((size_t)horizon + 1, 0);
    tr.Z.assign((size_t)horizon + 1, 0);
    for (int64_t a : arrivals)
        if (a >= 0 && a <= horizon) tr.Y[(size_t)a] = 1;
    size_t j = 0;
    for (int64_t t = 0; t <= horizon; ++t) {
        while (arrivals[j] < t) ++j;
        tr.Z[(size_t)t] = arrivals[j] - t;
    }
    while (!arrivals.empty() && arrivals.back() > horizon) arrivals.pop_back();
    tr.arrivals = std::move(arrivals);
    return tr;
}

RenewalTrajectory sample_renewal(const InterarrivalSpec& spec, const DelaySpec& delay,
                                 int64_t horizon, RngStream& rng) {
    if (!spec.integer_valued())
        throw std::runtime_error("renewal trajectories need an integer-valued gap law");
    EnvironmentWindow env = realize_to_horizon(spec, delay, (double)horizon, rng);
    std::vector<int64_t> arrivals;
    arrivals.reserve(env.columns.size());
    for (double x : env.columns) arrivals.push_back(llround(x));
    return trajectory_from_arrivals(std::move(arrivals), horizon);
}

int64_t CylinderEvent::width() const {
    int64_t w = 0;
    for (auto& [off, b] : bits) w = std::max(w, -off);
    return w;
}

bool CylinderEvent::eval(const RenewalTrajectory& tr, int64_t anchor) const {
    for (auto& [off, b] : bits) {
        int64_t t = anchor + off;
        if (t < 0 || t > tr.horizon) throw std::runtime_error("cylinder event out of window");
        if ((tr.Y[(size_t)t] != 0) != b) return false;
    }
    return true;
}

CylinderEvent CylinderEvent::renewal_at() { return {{{0, true}}}; }

CylinderEvent CylinderEvent::pattern(std::vector<std::pair<int64_t, bool>> bits) {
    for (auto& [off, b] : bits)
        if (off > 0) throw std::runtime_error("cylinder offsets must be <= 0");
    return {std::move(bits)};
}

namespace {

// Z-chain step for an integer gap law with bounded support:
// from 0 jump to xi - 1, from z > 0 step to z - 1.
struct ZChain {
    std::vector<double> jump;  // jump[j] = P(xi = j + 1), j = 0..smax-1
    int64_t smax;

    explicit ZChain(const InterarrivalSpec& spec) {
        auto ms = spec.max_support_int();
        if (!ms) throw std::runtime_error("exact renewal chain needs bounded support");
        smax = *ms;
        jump.resize((size_t)smax);
        for (int64_t k = 1; k <= smax; ++k) jump[(size_t)k - 1] = spec.pmf_int(k);
    }

    std::vector<double> stationary(const InterarrivalSpec& spec) const {
        std::vector<double> pi((size_t)smax);
        double mean = spec.mean().value;
        for (int64_t z = 0; z < smax; ++z) pi[(size_t)z] = spec.survival_int(z) / mean;
        return pi;
    }

    void step(std::vector<double>& v) const {
        double at0 = v[0];
        for (size_t z = 0; z + 1 < v.size(); ++z) v[z] = v[z + 1];
        v.back() = 0;
        for (int64_t z = 0; z < smax; ++z) v[(size_t)z] += at0 * jump[(size_t)z];
    }
};

void apply_constraint(std::vector<double>& v, bool renew) {
    if (renew) {
        double at0 = v[0];
        std::fill(v.begin(), v.end(), 0.0);
        v[0] = at0;
    } else {
        v[0] = 0;
    }
}

}  // namespace

double exact_cylinder_prob(const InterarrivalSpec& spec,
                           std::vector<std::pair<int64_t, bool>> constraints) {
    if (spec.kind() == GapKind::geometric) {
        // stationary renewal indicators are iid Bernoulli(q)
        double q = spec.geo_q(), p = 1;
        std::sort(constraints.begin(), constraints.end());
        for (size_t i = 0; i < constraints.size(); ++i) {
            if (i && constraints[i].first == constraints[i - 1].first) {
                if (constraints[i].second != constraints[i - 1].second) return 0;
                continue;
            }
            p *= constraints[i].second ? q : 1 - q;
        }
        return p;
    }
    ZChain chain(spec);
    std::vector<double> v = chain.stationary(spec);
    std::sort(constraints.begin(), constraints.end());
    int64_t t = 0;
    for (auto& [tc, b] : constraints) {
        if (tc < 0) throw std::runtime_error("constraint times must be >= 0");
        while (t < tc) {
            chain.step(v);
            ++t;
        }
        apply_constraint(v, b);
    }
    double total = 0;
    for (double x : v) total += x;
    return total;
}

double exact_cylinder_gap(const InterarrivalSpec& spec, const CylinderEvent& A,
                          const CylinderEvent& B, int64_t n) {
    int64_t wa = A.width(), wb = B.width();
    std::vector<std::pair<int64_t, bool>> ca, cb, cab;
    for (auto& [off, b] : A.bits) {
        ca.emplace_back(wa + off, b);
        cab.emplace_back(wa + off, b);
    }
    for (auto& [off, b] : B.bits) {
        cb.emplace_back(wb + off, b);
        cab.emplace_back(wa + n + off, b);
    }
    if (wa + n - wb < 0) throw std::runtime_error("separation smaller than event width");
    double pab = exact_cylinder_prob(spec, cab);
    double pa = exact_cylinder_prob(spec, ca);
    double pb = exact_cylinder_prob(spec, cb);
    return pab - pa * pb;
}

CouplingSample sample_coupling_time(const InterarrivalSpec& spec, const DelaySpec& d1,
                                    const DelaySpec& d2, int64_t cap, RngStream& rng) {
    if (!spec.integer_valued())
        throw std::runtime_error("coupling times need an integer-valued gap law");
    int64_t a = llround(d1.sample(spec, rng));
    int64_t b = llround(d2.sample(spec, rng));
    while (true) {
        if (a == b && a >= 1) return {a, false};
        if (a > cap && b > cap) return {cap, true};
        if (a <= b) a += spec.sample_int(rng);
        if (b < a) b += spec.sample_int(rng);
    }
}

bool coupling_tail_is_exact(const InterarrivalSpec& spec, const DelaySpec& d1,
                            const DelaySpec& d2) {
    if (spec.max_support_int()) {
        auto ok = [](const DelaySpec& d) {
            return d.kind() != DelaySpec::Kind::dirac ||
                   d.dirac_value() == std::floor(d.dirac_value());
        };
        return ok(d1) && ok(d2);
    }
    if (spec.kind() == GapKind::geometric) {
        auto memoryless_start = [](const DelaySpec& d) {
            return d.kind() == DelaySpec::Kind::stationary ||
                   (d.kind() == DelaySpec::Kind::dirac && d.dirac_value() == 0);
        };
        return memoryless_start(d1) && memoryless_start(d2);
    }
    return false;
}

namespace {

std::vector<double> delay_start_dist(const InterarrivalSpec& spec, const DelaySpec& d,
                                     int64_t zmax) {
    std::vector<double> v((size_t)zmax + 1, 0.0);
    switch (d.kind()) {
        case DelaySpec::Kind::dirac: {
            int64_t z = llround(d.dirac_value());
            if (z > zmax) throw std::runtime_error("delay exceeds chain state space");
            v[(size_t)z] = 1;
            break;
        }
        case DelaySpec::Kind::stationary: {
            double mean = spec.mean().value;
            for (int64_t z = 0; z <= zmax; ++z) v[(size_t)z] = spec.survival_int(z) / mean;
            break;
        }
        case DelaySpec::Kind::explicit_pmf: {
            const auto& p = d.probs();
            if ((int64_t)p.size() > zmax + 1)
                throw std::runtime_error("delay pmf exceeds chain state space");
            std::copy(p.begin(), p.end(), v.begin());
            break;
        }
    }
    return v;
}

}  // namespace

double coupling_tail_exact(const InterarrivalSpec& spec, const DelaySpec& d1, const DelaySpec& d2,
                           int64_t n) {
    if (spec.kind() == GapKind::geometric) {
        if (!coupling_tail_is_exact(spec, d1, d2))
            throw std::runtime_error("closed-form coupling tail needs memoryless starts");
        // Renewal indicators are iid Bernoulli(q); T ~ geometric(q^2).
        double q = spec.geo_q();
        return std::pow(1.0 - q * q, (double)n);
    }
    ZChain chain(spec);
    int64_t zmax = chain.smax - 1;
    auto bump = [&](const DelaySpec& d) {
        if (d.kind() == DelaySpec::Kind::dirac)
            zmax = std::max<int64_t>(zmax, llround(d.dirac_value()));
        if (d.kind() == DelaySpec::Kind::explicit_pmf)
            zmax = std::max(zmax, (int64_t)d.probs().size() - 1);
    };
    bump(d1);
    bump(d2);
    std::vector<double> va = delay_start_dist(spec, d1, zmax);
    std::vector<double> vb = delay_start_dist(spec, d2, zmax);
    size_t S = (size_t)zmax + 1;
    // joint[i*S+j]: both chains evolve independently until first simultaneous 0
    std::vector<double> joint(S * S);
    for (size_t i = 0; i < S; ++i)
        for (size_t j = 0; j < S; ++j) joint[i * S + j] = va[i] * vb[j];
    auto step_joint = [&](std::vector<double>& m) {
        std::vector<double> row(S);
        for (size_t i = 0; i < S; ++i) {  // advance second coordinate
            std::copy(m.begin() + i * S, m.begin() + (i + 1) * S, row.begin());
            double at0 = row[0];
            for (size_t z = 0; z + 1 < S; ++z) row[z] = row[z + 1];
            row[S - 1] = 0;
            for (int64_t z = 0; z < chain.smax; ++z) row[(size_t)z] += at0 * chain.jump[(size_t)z];
            std::copy(row.begin(), row.end(), m.begin() + i * S);
        }
        for (size_t j = 0; j < S; ++j) {  // advance first coordinate
            for (size_t i = 0; i < S; ++i) row[i] = m[i * S + j];
            double at0 = row[0];
            for (size_t z = 0; z + 1 < S; ++z) row[z] = row[z + 1];
            row[S - 1] = 0;
            for (int64_t z = 0; z < chain.smax; ++z) row[(size_t)z] += at0 * chain.jump[(size_t)z];
            for (size_t i = 0; i < S; ++i) m[i * S + j] = row[i];
        }
    };
    for (int64_t t = 1; t <= n; ++t) {
        step_joint(joint);
        joint[0] = 0;  // absorb simultaneous renewal: T = t
    }
    double rem = 0;
    for (double x : joint) rem += x;
    return rem;
}

namespace {

double e_rho_eps_value(const InterarrivalSpec& spec, double eps) {
    double mean = spec.mean().value;
    double acc = 0, mass = 0;
    auto ms = spec.max_support_int();
    int64_t kmax = ms ? *ms - 1 : (int64_t(1) << 21);
    for (int64_t k = 0; k <= kmax; ++k) {
        double rho = spec.survival_int(k) / mean;
        acc += rho * std::pow((double)k, eps);
        mass += rho;
        if (!ms && 1.0 - mass < 1e-14) break;
    }
    return acc;
}

double e_t_eps_exact(const InterarrivalSpec& spec, double eps) {
    DelaySpec st = DelaySpec::stationary();
    double acc = 0, prev = 1.0;
    for (int64_t n = 1; n <= 200000; ++n) {
        double tail = coupling_tail_exact(spec, st, st, n);
        acc += std::pow((double)n, eps) * (prev - tail);
        prev = tail;
        if (tail < 1e-15) break;
    }
    return acc;
}

}  // namespace

DecouplingEstimate estimate_c1(const InterarrivalSpec& spec, const CylinderEvent& A,
                               const CylinderEvent& B, int64_t anchor,
                               const std::vector<int64_t>& separations, double epsilon,
                               int64_t n_samples, RngStream& rng) {
    if (separations.empty()) throw std::runtime_error("need at least one separation");
    if (!spec.moment(1.0 + epsilon).finite)
        throw std::runtime_error("decoupling estimate needs a finite (1+epsilon)-moment");
    int64_t wa = A.width(), wb = B.width();
    if (anchor < wa) throw std::runtime_error("anchor must clear the event width");
    int64_t max_sep = *std::max_element(separations.begin(), separations.end());
    for (int64_t n : separations)
        if (n < wb) throw std::runtime_error("separation smaller than event width");
    int64_t horizon = anchor + max_sep;

    DecouplingEstimate out;
    out.epsilon = epsilon;
    bool finite = spec.max_support_int().has_value() || spec.kind() == GapKind::geometric;
    out.exact_gaps = finite;

    DelaySpec st = DelaySpec::stationary();
    std::vector<int64_t> c_a(1, 0);
    std::vector<int64_t> c_b(separations.size(), 0), c_ab(separations.size(), 0);
    for (int64_t s = 0; s < n_samples; ++s) {
        RenewalTrajectory tr = sample_renewal(spec, st, horizon, rng);
        bool a = A.eval(tr, anchor);
        if (a) ++c_a[0];
        for (size_t i = 0; i < separations.size(); ++i) {
            bool b = B.eval(tr, anchor + separations[i]);
            if (b) ++c_b[i];
            if (a && b) ++c_ab[i];
        }
    }
    double N = (double)n_samples;
    out.p_a = c_a[0] / N;
    out.p_b = c_b[0] / N;

    for (size_t i = 0; i < separations.size(); ++i) {
        DecouplingPoint pt;
        pt.n = separations[i];
        double pa = out.p_a, pb = c_b[i] / N, pab = c_ab[i] / N;
        pt.gap = pab - pa * pb;
        // delta method for pab_hat - pa_hat pb_hat from one sample set
        double v_ab = pab * (1 - pab), v_a = pa * (1 - pa), v_b = pb * (1 - pb);
        double c_ab_a = pab * (1 - pa), c_ab_b = pab * (1 - pb), c_a_b = pab - pa * pb;
        double var = (v_ab + pb * pb * v_a + pa * pa * v_b - 2 * pb * c_ab_a - 2 * pa * c_ab_b +
                      2 * pa * pb * c_a_b) /
                     N;
        pt.half_width = 3.0 * std::sqrt(std::max(0.0, var));
        if (finite) {
            pt.exact = true;
            pt.exact_gap = exact_cylinder_gap(spec, A, B, separations[i]);
        }
        out.points.push_back(pt);
    }

    for (const auto& pt : out.points) {
        double g = pt.exact ? std::fabs(pt.exact_gap) : std::fabs(pt.gap);
        out.c_fit = std::max(out.c_fit, g * std::pow((double)pt.n, epsilon));
        out.c_fit_mc = std::max(out.c_fit_mc, std::fabs(pt.gap) * std::pow((double)pt.n, epsilon));
    }

    out.e_rho_eps = e_rho_eps_value(spec, epsilon);
    out.exact_t_moment = coupling_tail_is_exact(spec, st, st);
    if (out.exact_t_moment) {
        if (spec.kind() == GapKind::geometric) {
            double q2 = spec.geo_q() * spec.geo_q();
            double acc = 0, w = 1.0;
            for (int64_t n = 1; n <= 4000000; ++n) {
                double term = std::pow((double)n, epsilon) * q2 * w;
                acc += term;
                w *= 1.0 - q2;
                if (w < 1e-17 && n > 8) break;
            }
            out.e_t_eps = acc;
        } else {
            out.e_t_eps = e_t_eps_exact(spec, epsilon);
        }
        out.censor_frac = 0;
    } else {
        int64_t cap = 1 << 20;
        int64_t censored = 0;
        double acc = 0;
        int64_t reps = std::min<int64_t>(n_samples, 200000);
        for (int64_t s = 0; s < reps; ++s) {
            CouplingSample cs = sample_coupling_time(spec, st, st, cap, rng);
            if (cs.censored) ++censored;
            acc += std::pow((double)cs.value, epsilon);
        }
        out.e_t_eps = acc / (double)reps;
        out.censor_frac = (double)censored / (double)reps;
    }
    out.c_paper = std::pow(2.0, epsilon) * (out.e_rho_eps + out.e_t_eps);
    return out;
}

StationarityReport shift_stationarity_check(const InterarrivalSpec& spec, int64_t m, int window,
                                            int64_t n_samples, RngStream& rng) {
    if (window < 0 || window > 20) throw std::runtime_error("window must lie in [0, 20]");
    DelaySpec st = DelaySpec::stationary();
    std::map<std::vector<int64_t>, std::pair<int64_t, int64_t>> cells;
    std::vector<int64_t> key((size_t)window + 1);
    for (int64_t s = 0; s < n_samples; ++s) {
        RenewalTrajectory t1 = sample_renewal(spec, st, m + window, rng);
        for (int i = 0; i <= window; ++i) key[(size_t)i] = t1.Z[(size_t)(m + i)];
        cells[key].first++;
        RenewalTrajectory t2 = sample_renewal(spec, st, window, rng);
        for (int i = 0; i <= window; ++i) key[(size_t)i] = t2.Z[(size_t)i];
        cells[key].second++;
    }
    StationarityReport rep;
    double tv = 0;
    for (auto& [k, c] : cells)
        tv += std::fabs((double)c.first - (double)c.second) / (double)n_samples;
    rep.tv = tv / 2;
    rep.cells = (int64_t)cells.size();
    rep.threshold = 3.0 * std::sqrt((double)rep.cells / (double)n_samples);
    rep.pass = rep.tv <= rep.threshold;
    return rep;
}

}  // namespace stretchperc
