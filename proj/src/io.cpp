#include "stretchperc/io.hpp"

#include <algorithm>
#include <cassert>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace stretchperc {

std::string fmt_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc{}) return "nan";
    return std::string(buf, ptr);
}

double parse_double_strict(const std::string& s) {
    const char* b = s.c_str();
    char* end = nullptr;
    double v = std::strtod(b, &end);
    if (end == b || *end != '\0') throw std::runtime_error("bad number: '" + s + "'");
    return v;
}

int64_t parse_int_strict(const std::string& s) {
    int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw std::runtime_error("bad integer: '" + s + "'");
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    for (size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

void KvBlock::set(const std::string& key, const std::string& value) {
    auto it = index_.find(key);
    if (it != index_.end()) {
        items_[it->second].second = value;
    } else {
        index_[key] = items_.size();
        items_.emplace_back(key, value);
    }
}

bool KvBlock::has(const std::string& key) const { return index_.count(key) != 0; }

const std::string& KvBlock::get(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) throw std::runtime_error("missing config key: " + key);
    return items_[it->second].second;
}

std::string KvBlock::get_or(const std::string& key, const std::string& dflt) const {
    auto it = index_.find(key);
    return it == index_.end() ? dflt : items_[it->second].second;
}

double KvBlock::get_double(const std::string& key) const { return parse_double_strict(get(key)); }
int64_t KvBlock::get_int(const std::string& key) const { return parse_int_strict(get(key)); }

std::string KvBlock::emit() const {
    std::string out;
    for (const auto& [k, v] : items_) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    return out;
}

KvBlock KvBlock::parse(const std::string& text) {
    KvBlock kv;
    for (const auto& raw : split(text, '\n')) {
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("bad config line: " + line);
        kv.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return kv;
}

uint64_t KvBlock::hash() const {
    auto sorted = items_;
    std::sort(sorted.begin(), sorted.end());
    uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        h ^= 0xff;
        h *= 0x100000001b3ull;
    };
    for (const auto& [k, v] : sorted) {
        mix(k);
        mix(v);
    }
    return h;
}

WilsonInterval wilson_ci(uint64_t successes, uint64_t n, double z) {
    assert(n > 0 && successes <= n);
    double ph = double(successes) / double(n);
    double z2 = z * z;
    double denom = 1.0 + z2 / double(n);
    double center = (ph + z2 / (2.0 * double(n))) / denom;
    double rad = z * std::sqrt(ph * (1 - ph) / double(n) + z2 / (4.0 * double(n) * double(n))) / denom;
    double lo = std::max(0.0, center - rad);
    double hi = std::min(1.0, center + rad);
    return {lo, hi, center};
}

namespace {

// Lanczos log-gamma, g = 7.
double lgamma_l(double x) { return std::lgamma(x); }

double gamma_p_series(double a, double x) {
    // lower regularized P(a,x) by series; for x < a + 1
    double sum = 1.0 / a, term = sum;
    for (int n = 1; n < 10000; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lgamma_l(a));
}

double gamma_q_cf(double a, double x) {
    // upper regularized Q(a,x) by Lentz continued fraction; for x >= a + 1
    const double tiny = 1e-300;
    double b = x + 1 - a, c = 1 / tiny, d = 1 / b, h = d;
    for (int i = 1; i < 10000; ++i) {
        double an = -double(i) * (double(i) - a);
        b += 2;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - lgamma_l(a)) * h;
}

}  // namespace

double regularized_gamma_q(double a, double x) {
    if (x < 0 || a <= 0) return std::nan("");
    if (x == 0) return 1.0;
    if (x < a + 1) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

double chi_square_pvalue(double stat, int dof) {
    if (stat <= 0) return 1.0;
    return regularized_gamma_q(0.5 * dof, 0.5 * stat);
}

}  // namespace stretchperc
