#pragma once
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace stretchperc {

// Shortest round-trip decimal text for a double; deterministic across runs.
std::string fmt_double(double x);
double parse_double_strict(const std::string& s);
int64_t parse_int_strict(const std::string& s);

std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);

// Flat "key = value" configuration block, one pair per line, '#' comments.
class KvBlock {
public:
    void set(const std::string& key, const std::string& value);
    void set_double(const std::string& key, double v) { set(key, fmt_double(v)); }
    void set_int(const std::string& key, int64_t v) { set(key, std::to_string(v)); }
    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;  // throws on missing
    std::string get_or(const std::string& key, const std::string& dflt) const;
    double get_double(const std::string& key) const;
    int64_t get_int(const std::string& key) const;

    std::string emit() const;  // keys in insertion order
    static KvBlock parse(const std::string& text);

    // order-independent content hash (FNV-1a over sorted pairs)
    uint64_t hash() const;

    const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

private:
    std::vector<std::pair<std::string, std::string>> items_;
    std::map<std::string, size_t> index_;
};

struct WilsonInterval {
    double lo, hi, center;
};
// z-score interval for a binomial proportion; safe at k = 0 and k = n.
WilsonInterval wilson_ci(uint64_t successes, uint64_t n, double z);

// Upper regularized incomplete gamma Q(a, x); chi-square tail p-value.
double regularized_gamma_q(double a, double x);
double chi_square_pvalue(double stat, int dof);

}  // namespace stretchperc
