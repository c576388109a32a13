#include "stretchperc/interarrival.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "stretchperc/io.hpp"

namespace stretchperc {

long double zeta_tail(double s, int64_t K) {
    // Sum k^{-s} explicitly up to max(K, 64), then Euler-Maclaurin from N.
    // With N >= 65 the first omitted term is below long double resolution
    // relative to the total for every s > 1 we use.
    int64_t M = std::max<int64_t>(K, 64);
    long double acc = 0;
    for (int64_t k = K + 1; k <= M; ++k) acc += powl((long double)k, -(long double)s);
    long double N = (long double)(M + 1);
    long double ls = s;
    long double nms = powl(N, -ls);
    acc += N * nms / (ls - 1);  // integral
    acc += nms / 2;
    acc += ls * nms / N / 12;
    acc -= ls * (ls + 1) * (ls + 2) * nms / (N * N * N) / 720;
    acc += ls * (ls + 1) * (ls + 2) * (ls + 3) * (ls + 4) * nms / (N * N * N * N * N) / 30240;
    return acc;
}

struct ZetaTable {
    double s;
    long double zeta_s;
    std::vector<long double> cdf;  // cdf[k-1] = P(xi <= k)

    explicit ZetaTable(double s_) : s(s_) {
        zeta_s = zeta_tail(s, 0);
        const size_t n = 8192;
        cdf.resize(n);
        long double acc = 0;
        for (size_t k = 1; k <= n; ++k) {
            acc += powl((long double)k, -(long double)s);
            cdf[k - 1] = acc / zeta_s;
        }
    }

    int64_t quantile(double u) const {
        // smallest k >= 1 with u < P(xi <= k)
        long double lu = u;
        if (lu < cdf.back()) {
            auto it = std::upper_bound(cdf.begin(), cdf.end(), lu);
            return (int64_t)(it - cdf.begin()) + 1;
        }
        // Deep tail: P(xi <= k) >= u  <=>  tail(k) <= (1-u) * zeta(s).
        // 1-u is exact here (u is a double >= 1/2).
        long double target = (1.0L - lu) * zeta_s;
        int64_t lo = (int64_t)cdf.size(), hi = lo;
        while (zeta_tail(s, hi) > target) {
            lo = hi;
            if (hi > (int64_t(1) << 61)) break;
            hi *= 2;
        }
        while (lo + 1 < hi) {
            int64_t mid = lo + (hi - lo) / 2;
            if (zeta_tail(s, mid) > target)
                lo = mid;
            else
                hi = mid;
        }
        return hi;
    }
};

InterarrivalSpec InterarrivalSpec::deterministic(double v) {
    if (!(v > 0)) throw SpecError("deterministic gap must be positive");
    InterarrivalSpec sp;
    sp.kind_ = GapKind::deterministic;
    sp.a_ = v;
    return sp;
}

InterarrivalSpec InterarrivalSpec::geometric(double q) {
    if (!(q > 0 && q <= 1)) throw SpecError("geometric parameter must lie in (0,1]");
    InterarrivalSpec sp;
    sp.kind_ = GapKind::geometric;
    sp.a_ = q;
    return sp;
}

InterarrivalSpec InterarrivalSpec::zeta(double s) {
    if (!(s > 1)) throw SpecError("zeta exponent must exceed 1");
    InterarrivalSpec sp;
    sp.kind_ = GapKind::zeta;
    sp.a_ = s;
    sp.zt_ = std::make_shared<ZetaTable>(s);
    return sp;
}

InterarrivalSpec InterarrivalSpec::finite_pmf(std::vector<std::pair<double, double>> value_prob) {
    if (value_prob.empty()) throw SpecError("empty pmf");
    std::sort(value_prob.begin(), value_prob.end());
    std::vector<std::pair<double, double>> merged;
    for (auto& [v, p] : value_prob) {
        if (!(v > 0)) throw SpecError("pmf values must be positive");
        if (!(p > 0)) throw SpecError("pmf probabilities must be positive");
        if (!merged.empty() && merged.back().first == v)
            merged.back().second += p;
        else
            merged.emplace_back(v, p);
    }
    double sum = 0;
    for (auto& [v, p] : merged) sum += p;
    if (std::fabs(sum - 1.0) > 1e-9) throw SpecError("pmf must sum to 1");
    InterarrivalSpec sp;
    sp.kind_ = GapKind::finite_pmf;
    sp.table_ = std::move(merged);
    double acc = 0;
    for (auto& [v, p] : sp.table_) {
        p /= sum;
        acc += p;
        sp.cdf_.push_back(acc);
    }
    sp.cdf_.back() = 1.0;
    return sp;
}

InterarrivalSpec InterarrivalSpec::scaled(InterarrivalSpec inner, double multiplier) {
    if (!(multiplier > 0)) throw SpecError("scale multiplier must be positive");
    if (inner.kind_ == GapKind::scaled) {
        multiplier *= inner.a_;
        inner = *inner.inner_;
    }
    if (inner.kind_ == GapKind::deterministic)
        return deterministic(inner.a_ * multiplier);
    if (inner.kind_ == GapKind::finite_pmf) {
        auto tbl = inner.table_;
        for (auto& [v, p] : tbl) v *= multiplier;
        return finite_pmf(std::move(tbl));
    }
    InterarrivalSpec sp;
    sp.kind_ = GapKind::scaled;
    sp.a_ = multiplier;
    sp.inner_ = std::make_shared<InterarrivalSpec>(std::move(inner));
    return sp;
}

double InterarrivalSpec::sample(RngStream& rng) const {
    switch (kind_) {
        case GapKind::deterministic:
            return a_;
        case GapKind::geometric: {
            if (a_ == 1.0) return 1;
            double u = rng.next_uniform();
            // smallest k >= 1 with u < 1 - (1-q)^k
            double k = std::floor(std::log1p(-u) / std::log1p(-a_)) + 1;
            return std::max(1.0, k);
        }
        case GapKind::zeta:
            return (double)zt_->quantile(rng.next_uniform());
        case GapKind::finite_pmf: {
            double u = rng.next_uniform();
            auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
            size_t i = std::min<size_t>(it - cdf_.begin(), table_.size() - 1);
            return table_[i].first;
        }
        case GapKind::scaled:
            return a_ * inner_->sample(rng);
    }
    return 1;
}

int64_t InterarrivalSpec::sample_int(RngStream& rng) const { return llround(sample(rng)); }

namespace {
bool near_integer(double v) { return std::fabs(v - std::round(v)) < 1e-9; }
}  // namespace

bool InterarrivalSpec::integer_valued() const {
    switch (kind_) {
        case GapKind::deterministic:
            return near_integer(a_);
        case GapKind::geometric:
        case GapKind::zeta:
            return true;
        case GapKind::finite_pmf:
            return std::all_of(table_.begin(), table_.end(),
                               [](auto& vp) { return near_integer(vp.first); });
        case GapKind::scaled:
            // inner is geometric or zeta (support all of {1,2,...})
            return near_integer(a_);
    }
    return false;
}

Moment InterarrivalSpec::moment(double eta) const {
    if (eta == 0) return {true, 1.0};
    switch (kind_) {
        case GapKind::deterministic:
            return {true, std::pow(a_, eta)};
        case GapKind::geometric: {
            if (eta == 1.0) return {true, 1.0 / a_};
            double acc = 0, w = 1.0;
            for (int64_t k = 1; k < 2000000; ++k) {
                double term = std::pow((double)k, eta) * a_ * w;
                acc += term;
                w *= (1.0 - a_);
                if (term < acc * 1e-17 && k > 8) break;
            }
            return {true, acc};
        }
        case GapKind::zeta: {
            if (eta >= a_ - 1) return {false, std::numeric_limits<double>::infinity()};
            return {true, (double)(zeta_tail(a_ - eta, 0) / zt_->zeta_s)};
        }
        case GapKind::finite_pmf: {
            double acc = 0;
            for (auto& [v, p] : table_) acc += p * std::pow(v, eta);
            return {true, acc};
        }
        case GapKind::scaled: {
            Moment m = inner_->moment(eta);
            if (!m.finite) return m;
            return {true, std::pow(a_, eta) * m.value};
        }
    }
    return {true, 1.0};
}

double InterarrivalSpec::pmf_int(int64_t k) const {
    switch (kind_) {
        case GapKind::deterministic:
            return (near_integer(a_) && llround(a_) == k) ? 1.0 : 0.0;
        case GapKind::geometric:
            if (k < 1) return 0;
            return a_ * std::pow(1.0 - a_, (double)(k - 1));
        case GapKind::zeta:
            if (k < 1) return 0;
            return (double)(powl((long double)k, -(long double)a_) / zt_->zeta_s);
        case GapKind::finite_pmf: {
            double acc = 0;
            for (auto& [v, p] : table_)
                if (near_integer(v) && llround(v) == k) acc += p;
            return acc;
        }
        case GapKind::scaled: {
            int64_t m = llround(a_);
            if (m < 1 || k % m != 0) return 0;
            return inner_->pmf_int(k / m);
        }
    }
    return 0;
}

double InterarrivalSpec::survival_int(int64_t k) const {
    if (k < 0) return 1.0;
    switch (kind_) {
        case GapKind::deterministic:
            return a_ > (double)k ? 1.0 : 0.0;
        case GapKind::geometric:
            return std::pow(1.0 - a_, (double)k);
        case GapKind::zeta: {
            if (k == 0) return 1.0;
            if ((size_t)k <= zt_->cdf.size()) return (double)(1.0L - zt_->cdf[k - 1]);
            return (double)(zeta_tail(a_, k) / zt_->zeta_s);
        }
        case GapKind::finite_pmf: {
            double acc = 0;
            for (auto& [v, p] : table_)
                if (v > (double)k) acc += p;
            return acc;
        }
        case GapKind::scaled: {
            int64_t m = llround(a_);
            // m*xi' > k  <=>  xi' > floor(k/m)
            return inner_->survival_int(k / m);
        }
    }
    return 0;
}

double InterarrivalSpec::survival_geq(double t) const {
    if (t <= 0) return 1.0;
    switch (kind_) {
        case GapKind::deterministic:
            return a_ >= t ? 1.0 : 0.0;
        case GapKind::geometric:
        case GapKind::zeta:
            return survival_int((int64_t)std::ceil(t) - 1);
        case GapKind::finite_pmf: {
            double acc = 0;
            for (auto& [v, p] : table_)
                if (v >= t) acc += p;
            return acc;
        }
        case GapKind::scaled:
            return inner_->survival_geq(t / a_);
    }
    return 0;
}

std::optional<int64_t> InterarrivalSpec::max_support_int() const {
    switch (kind_) {
        case GapKind::deterministic:
            return near_integer(a_) ? std::optional<int64_t>(llround(a_)) : std::nullopt;
        case GapKind::finite_pmf: {
            double v = table_.back().first;
            return near_integer(v) ? std::optional<int64_t>(llround(v)) : std::nullopt;
        }
        default:
            return std::nullopt;
    }
}

bool InterarrivalSpec::is_aperiodic(int64_t* period) const {
    int64_t g = 0;
    switch (kind_) {
        case GapKind::deterministic:
            g = llround(a_);
            break;
        case GapKind::geometric:
        case GapKind::zeta:
            g = 1;
            break;
        case GapKind::finite_pmf:
            for (auto& [v, p] : table_) g = std::gcd(g, llround(v));
            break;
        case GapKind::scaled: {
            int64_t gi = 1;
            inner_->is_aperiodic(&gi);
            g = llround(a_) * gi;
            break;
        }
    }
    if (period) *period = g;
    return g == 1;
}

AperiodicReduction reduce_to_aperiodic(const InterarrivalSpec& spec) {
    if (!spec.integer_valued()) {
        // take ceilings first, then divide out the period
        switch (spec.kind()) {
            case GapKind::deterministic:
                return reduce_to_aperiodic(
                    InterarrivalSpec::deterministic(std::ceil(spec.det_value())));
            case GapKind::finite_pmf: {
                auto tbl = spec.table();
                for (auto& [v, p] : tbl) v = std::ceil(v - 1e-9);
                return reduce_to_aperiodic(InterarrivalSpec::finite_pmf(std::move(tbl)));
            }
            default:
                throw SpecError(
                    "ceiling of a non-integer infinite-support gap law is not "
                    "representable; supply a finite pmf instead");
        }
    }
    int64_t g = 1;
    if (spec.is_aperiodic(&g)) return {spec, 1};
    switch (spec.kind()) {
        case GapKind::deterministic:
            return {InterarrivalSpec::deterministic(double(llround(spec.det_value()) / g)), g};
        case GapKind::finite_pmf: {
            auto tbl = spec.table();
            for (auto& [v, p] : tbl) v = double(llround(v) / g);
            return {InterarrivalSpec::finite_pmf(std::move(tbl)), g};
        }
        case GapKind::scaled: {
            auto in = reduce_to_aperiodic(spec.inner());
            return {in.reduced, llround(spec.multiplier()) * in.m};
        }
        default:
            return {spec, 1};  // unreachable: geometric/zeta are aperiodic
    }
}

std::string InterarrivalSpec::compact() const {
    switch (kind_) {
        case GapKind::deterministic:
            return "det:" + fmt_double(a_);
        case GapKind::geometric:
            return "geometric:" + fmt_double(a_);
        case GapKind::zeta:
            return "zeta:" + fmt_double(a_);
        case GapKind::finite_pmf: {
            std::string out = "pmf:";
            for (size_t i = 0; i < table_.size(); ++i) {
                if (i) out += ',';
                out += fmt_double(table_[i].first) + ':' + fmt_double(table_[i].second);
            }
            return out;
        }
        case GapKind::scaled:
            return "scaled:" + fmt_double(a_) + ':' + inner_->compact();
    }
    return "";
}

InterarrivalSpec InterarrivalSpec::parse_compact(const std::string& text) {
    size_t c = text.find(':');
    std::string head = c == std::string::npos ? text : text.substr(0, c);
    std::string rest = c == std::string::npos ? "" : text.substr(c + 1);
    if (head == "det") return deterministic(parse_double_strict(rest));
    if (head == "geometric" || head == "geom") return geometric(parse_double_strict(rest));
    if (head == "zeta") return zeta(parse_double_strict(rest));
    if (head == "pmf") {
        std::vector<std::pair<double, double>> tbl;
        if (!rest.empty() && rest[0] == '@') {
            // pmf:@table.csv with one "value,prob" row per line
            std::ifstream in(rest.substr(1));
            if (!in) throw SpecError("cannot open pmf table '" + rest.substr(1) + "'");
            std::string line;
            while (std::getline(in, line)) {
                line = trim(line);
                if (line.empty() || line[0] == '#') continue;
                auto vp = split(line, ',');
                if (vp.size() != 2) throw SpecError("pmf table rows look like value,prob");
                tbl.emplace_back(parse_double_strict(trim(vp[0])),
                                 parse_double_strict(trim(vp[1])));
            }
            return finite_pmf(std::move(tbl));
        }
        for (const auto& item : split(rest, ',')) {
            auto vp = split(item, ':');
            if (vp.size() != 2) throw SpecError("pmf entries look like value:prob");
            tbl.emplace_back(parse_double_strict(vp[0]), parse_double_strict(vp[1]));
        }
        return finite_pmf(std::move(tbl));
    }
    if (head == "scaled") {
        size_t c2 = rest.find(':');
        if (c2 == std::string::npos) throw SpecError("scaled:<mult>:<spec>");
        return scaled(parse_compact(rest.substr(c2 + 1)), parse_double_strict(rest.substr(0, c2)));
    }
    throw SpecError("unknown gap law '" + head + "'");
}

std::string InterarrivalSpec::serialize() const {
    KvBlock kv;
    kv.set("gap_law", compact());
    return kv.emit();
}

InterarrivalSpec InterarrivalSpec::parse(const std::string& text) {
    return parse_compact(KvBlock::parse(text).get("gap_law"));
}

DelaySpec DelaySpec::dirac(double v) {
    if (v < 0) throw SpecError("delay must be nonnegative");
    DelaySpec d;
    d.kind_ = Kind::dirac;
    d.v_ = v;
    return d;
}

DelaySpec DelaySpec::stationary() {
    DelaySpec d;
    d.kind_ = Kind::stationary;
    return d;
}

DelaySpec DelaySpec::explicit_pmf(std::vector<double> probs) {
    double sum = 0;
    for (double p : probs) {
        if (p < 0) throw SpecError("delay pmf entries must be nonnegative");
        sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-9) throw SpecError("delay pmf must sum to 1");
    DelaySpec d;
    d.kind_ = Kind::explicit_pmf;
    d.probs_ = std::move(probs);
    return d;
}

double DelaySpec::sample(const InterarrivalSpec& spec, RngStream& rng) const {
    switch (kind_) {
        case Kind::dirac:
            return v_;
        case Kind::explicit_pmf: {
            double u = rng.next_uniform(), acc = 0;
            for (size_t k = 0; k < probs_.size(); ++k) {
                acc += probs_[k];
                if (u < acc) return (double)k;
            }
            return (double)(probs_.size() - 1);
        }
        case Kind::stationary:
            break;
    }
    if (!spec.integer_valued())
        throw SpecError("stationary delay needs an integer-valued gap law");
    Moment mu = spec.mean();
    if (!mu.finite) throw SpecError("stationary delay needs a finite-mean gap law");
    double u = rng.next_uniform();
    if (spec.kind() == GapKind::zeta) {
        // P(rho > k) = (tail1(k+1) - (k+1) tail0(k+1)) / zeta(s-1); binary search.
        double s = spec.zeta_s();
        long double z1 = zeta_tail(s - 1, 0);
        auto surv = [&](int64_t k) -> long double {
            return (zeta_tail(s - 1, k + 1) - (long double)(k + 1) * zeta_tail(s, k + 1)) / z1;
        };
        long double target = 1.0L - (long double)u;  // want smallest k with surv(k) < target
        int64_t lo = -1, hi = 1;
        while (surv(hi) >= target) {
            lo = hi;
            hi *= 2;
        }
        while (lo + 1 < hi) {
            int64_t mid = lo + (hi - lo) / 2;
            if (surv(mid) >= target)
                lo = mid;
            else
                hi = mid;
        }
        return (double)hi;
    }
    double acc = 0;
    for (int64_t k = 0; k < (int64_t)1 << 24; ++k) {
        acc += spec.survival_int(k) / mu.value;
        if (u < acc) return (double)k;
    }
    throw SpecError("stationary delay walk failed to terminate");
}

std::string DelaySpec::compact() const {
    switch (kind_) {
        case Kind::dirac:
            return "dirac:" + fmt_double(v_);
        case Kind::stationary:
            return "stationary";
        case Kind::explicit_pmf: {
            std::string out = "pmf:";
            for (size_t i = 0; i < probs_.size(); ++i) {
                if (i) out += ',';
                out += fmt_double(probs_[i]);
            }
            return out;
        }
    }
    return "";
}

DelaySpec DelaySpec::parse_compact(const std::string& text) {
    if (text == "stationary") return stationary();
    size_t c = text.find(':');
    std::string head = c == std::string::npos ? text : text.substr(0, c);
    std::string rest = c == std::string::npos ? "" : text.substr(c + 1);
    if (head == "dirac") return dirac(parse_double_strict(rest));
    if (head == "pmf") {
        std::vector<double> probs;
        for (const auto& item : split(rest, ',')) probs.push_back(parse_double_strict(item));
        return explicit_pmf(std::move(probs));
    }
    throw SpecError("unknown delay law '" + head + "'");
}

std::vector<double> stationary_delay_pmf(const InterarrivalSpec& spec, int64_t kmax,
                                         double* tail_mass) {
    if (!spec.integer_valued()) throw SpecError("stationary pmf needs an integer-valued gap law");
    Moment mu = spec.mean();
    if (!mu.finite) throw SpecError("stationary pmf needs a finite-mean gap law");
    std::vector<double> out((size_t)kmax + 1);
    double acc = 0;
    for (int64_t k = 0; k <= kmax; ++k) {
        out[(size_t)k] = spec.survival_int(k) / mu.value;
        acc += out[(size_t)k];
    }
    if (tail_mass) *tail_mass = std::max(0.0, 1.0 - acc);
    return out;
}

}  // namespace stretchperc
