#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "stretchperc/crossings.hpp"
#include "stretchperc/duality.hpp"
#include "stretchperc/environment.hpp"
#include "stretchperc/experiments.hpp"
#include "stretchperc/interarrival.hpp"
#include "stretchperc/io.hpp"
#include "stretchperc/lattice.hpp"
#include "stretchperc/renewal.hpp"
#include "stretchperc/scales.hpp"

namespace py = pybind11;
using namespace stretchperc;

namespace {

Formulation formulation_from(const std::string& name) {
    if (name == "stretched_lengths") return Formulation::stretched_lengths;
    if (name == "inhomogeneous") return Formulation::inhomogeneous;
    if (name == "dilute") return Formulation::dilute;
    throw SpecError("unknown formulation: " + name);
}

Rectangle rect_from(const std::vector<int64_t>& r) {
    if (r.size() != 4) throw SpecError("rect needs four entries a,b,c,d");
    return Rectangle(r[0], r[1], r[2], r[3]);
}

// Enough environment for any edge of a region whose columns stay <= reach:
// the dilute formulation walks integer columns up to the horizon, the other
// two need the gap behind each horizontal edge's right endpoint.
EnvironmentWindow env_for(const InterarrivalSpec& spec, const DelaySpec& delay,
                          Formulation f, int64_t reach, RngStream& rng) {
    if (f == Formulation::dilute) return realize_to_horizon(spec, delay, double(reach), rng);
    return realize_environment(spec, delay, size_t(reach) + 1, rng);
}

py::dict point_dict(double p, uint64_t hits, uint64_t n) {
    auto ci = wilson_ci(hits, n, 3.0);
    py::dict d;
    d["p"] = p;
    d["hits"] = hits;
    d["n"] = n;
    d["p_hat"] = n ? double(hits) / double(n) : 0.0;
    d["ci_lo"] = ci.lo;
    d["ci_hi"] = ci.hi;
    return d;
}

}  // namespace

PYBIND11_MODULE(_stretchperc, m) {
    m.doc() = "Percolation on a randomly stretched square lattice";
    m.attr("__version__") = "0.1.0";
    py::register_exception<SpecError>(m, "SpecError", PyExc_ValueError);

    m.def(
        "stationary_pmf",
        [](const std::string& spec, int64_t kmax) {
            double tail = 0;
            auto rho = stationary_delay_pmf(InterarrivalSpec::parse_compact(spec), kmax, &tail);
            return py::make_tuple(rho, tail);
        },
        py::arg("spec"), py::arg("kmax"),
        "Stationary delay pmf rho_0..rho_kmax and the mass beyond kmax.");

    m.def(
        "gap_moment",
        [](const std::string& spec, double eta) {
            auto mom = InterarrivalSpec::parse_compact(spec).moment(eta);
            return py::make_tuple(mom.finite, mom.value);
        },
        py::arg("spec"), py::arg("eta"), "E(xi^eta) as (finite, value).");

    m.def(
        "sample_arrivals",
        [](const std::string& spec, const std::string& delay, int64_t horizon, uint64_t seed) {
            RngStream rng(seed, 1);
            return sample_renewal(InterarrivalSpec::parse_compact(spec),
                                  DelaySpec::parse_compact(delay), horizon, rng)
                .arrivals;
        },
        py::arg("spec"), py::arg("delay"), py::arg("horizon"), py::arg("seed") = 0,
        "Arrival points of one renewal trajectory; the last one lands at or past horizon.");

    m.def(
        "renewal_covariance",
        [](const std::string& spec, int64_t n) {
            auto s = InterarrivalSpec::parse_compact(spec);
            auto at = CylinderEvent::renewal_at();
            return exact_cylinder_gap(s, at, at, n);
        },
        py::arg("spec"), py::arg("n"),
        "Exact Cov(Y_m, Y_{m+n}) under stationarity; finite-support laws only.");

    m.def(
        "scale_ladder",
        [](int64_t L0, int kmax, double epsilon, double alpha, double gamma, double mu,
           double beta, const std::string& height, int64_t desk_h) {
            auto params = params_relaxed(epsilon, alpha, gamma, mu, beta);
            HeightMode mode;
            if (height == "desk")
                mode = HeightMode::desk;
            else if (height == "exact_log")
                mode = HeightMode::exact_log;
            else
                throw SpecError("height must be desk or exact_log");
            auto sys = build_scales(params, L0, kmax, mode, desk_h);
            std::vector<py::dict> rows;
            for (int k = 0; k <= sys.kmax(); ++k) {
                py::dict d;
                d["k"] = k;
                d["L"] = sys.L_int(k);
                d["ratio"] = sys.ratio_int(k);
                d["H"] = sys.H_int(k);
                d["log10_H"] = sys.log10_H(k);
                rows.push_back(d);
            }
            return rows;
        },
        py::arg("L0"), py::arg("kmax"), py::arg("epsilon") = 1.0, py::arg("alpha") = 0.5,
        py::arg("gamma") = 1.2, py::arg("mu") = 0.5, py::arg("beta") = 0.9,
        py::arg("height") = "desk", py::arg("desk_h") = 4,
        "Scale ladder rows (k, L, ratio, H, log10_H).");

    m.def(
        "realize_gaps",
        [](const std::string& spec, const std::string& delay, int64_t n_gaps, uint64_t seed) {
            RngStream rng(seed, 0);
            auto env = realize_environment(InterarrivalSpec::parse_compact(spec),
                                           DelaySpec::parse_compact(delay), size_t(n_gaps), rng);
            return py::make_tuple(env.delay(), env.gaps());
        },
        py::arg("spec"), py::arg("delay"), py::arg("n_gaps"), py::arg("seed") = 0,
        "One sampled environment as (delay, gaps).");

    m.def(
        "crossing_exact",
        [](const std::string& spec, const std::string& delay, double p,
           const std::vector<int64_t>& rect, const std::string& formulation, char direction,
           uint64_t seed) {
            auto r = rect_from(rect);
            auto f = formulation_from(formulation);
            RngStream rng(seed, 4);
            auto env = env_for(InterarrivalSpec::parse_compact(spec),
                               DelaySpec::parse_compact(delay), f, r.b, rng);
            return exact_crossing_prob(env, p, r, f, direction);
        },
        py::arg("spec"), py::arg("delay"), py::arg("p"), py::arg("rect"),
        py::arg("formulation") = "inhomogeneous", py::arg("direction") = 'h',
        py::arg("seed") = 0,
        "Environment-conditional crossing probability by full enumeration (<= 24 edges).");

    m.def(
        "crossing_mc",
        [](const std::string& spec, const std::string& delay, double p,
           const std::vector<int64_t>& rect, const std::string& formulation, char direction,
           int64_t samples, uint64_t seed) {
            auto r = rect_from(rect);
            auto f = formulation_from(formulation);
            RngStream rng(seed, 4);
            auto env = env_for(InterarrivalSpec::parse_compact(spec),
                               DelaySpec::parse_compact(delay), f, r.b, rng);
            uint64_t hits = 0;
            for (int64_t s = 0; s < samples; ++s) {
                RngStream child = rng.child(uint64_t(s) + 1);
                if (streamed_crossing_sample(env, p, r, f, direction, child)) ++hits;
            }
            return point_dict(p, hits, uint64_t(samples));
        },
        py::arg("spec"), py::arg("delay"), py::arg("p"), py::arg("rect"),
        py::arg("formulation") = "inhomogeneous", py::arg("direction") = 'h',
        py::arg("samples") = 1000, py::arg("seed") = 0,
        "Monte Carlo crossing estimate in one sampled environment; Wilson CI at z = 3.");

    m.def(
        "choose_kappa",
        [](const std::string& spec) { return choose_kappa(InterarrivalSpec::parse_compact(spec)); },
        py::arg("spec"), "Largest contraction threshold kappa in (0, 1] with P(xi >= kappa) >= 1/2.");

    m.def(
        "dual_edge_parameter",
        [](const std::string& spec, double p) {
            double kappa = choose_kappa(InterarrivalSpec::parse_compact(spec));
            return py::make_tuple(kappa, 1.0 - std::pow(p, kappa));
        },
        py::arg("spec"), py::arg("p"),
        "(kappa, 1 - p^kappa): the dual horizontal parameter after contraction.");

    m.def(
        "run_config",
        [](const std::string& text) {
            auto cfg = parse_config(text);
            auto rec = run(cfg);
            py::dict d;
            char buf[32];
            std::snprintf(buf, sizeof buf, "%016llx",
                          static_cast<unsigned long long>(rec.config_hash));
            d["config_hash"] = std::string(buf);
            d["lines"] = rec.lines;
            d["reused"] = rec.reused;
            return d;
        },
        py::arg("text"),
        "Parse a key = value experiment config and run its task list; returns the JSON lines.");
}
