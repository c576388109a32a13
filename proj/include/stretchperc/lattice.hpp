#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "stretchperc/environment.hpp"
#include "stretchperc/rng.hpp"

namespace stretchperc {

// Disjoint sets over {0..n-1}; roots store the negated component size.
class UnionFind {
public:
    explicit UnionFind(int64_t n);
    int64_t find(int64_t v);
    bool unite(int64_t a, int64_t b);  // false when already in one component
    bool same(int64_t a, int64_t b) { return find(a) == find(b); }
    int64_t component_size(int64_t v) { return -parent_[size_t(find(v))]; }
    void reset();

private:
    std::vector<int64_t> parent_;
};

// stretched_lengths and inhomogeneous assign identical edge probabilities
// (p^{gap} horizontals, p verticals on the column-index grid); they differ
// only in how the window is read. dilute lives on the physical integer grid:
// horizontals p everywhere, verticals p at environment columns and 0 off them.
enum class Formulation { stretched_lengths, inhomogeneous, dilute };

const char* formulation_name(Formulation f);
Formulation parse_formulation(const std::string& name);

// R([a,b) x [c,d)): vertex set [a,b] x [c,d]; one horizontal and one vertical
// edge per cell (x,y) in [a,b-1] x [c,d-1], so the right and top sides carry
// no edges and the corner (b,d) is isolated.
struct Rectangle {
    int64_t a = 0, b = 1, c = 0, d = 1;

    Rectangle() = default;
    Rectangle(int64_t a_, int64_t b_, int64_t c_, int64_t d_);

    int64_t width() const { return b - a; }
    int64_t height() const { return d - c; }
    int64_t n_cells() const { return width() * height(); }
    int64_t n_edges() const { return 2 * n_cells(); }
    int64_t n_vertices() const { return (width() + 1) * (height() + 1); }

    bool contains_vertex(int64_t x, int64_t y) const {
        return a <= x && x <= b && c <= y && y <= d;
    }
    bool contains_rect(const Rectangle& r) const {
        return a <= r.a && r.b <= b && c <= r.c && r.d <= d;
    }

    // Row-major over cells, horizontal slot 0 before vertical slot 1.
    // Uniforms are keyed by this index, which keeps re-thresholding bit-stable.
    int64_t edge_index(int64_t x, int64_t y, int slot) const {
        return 2 * ((y - c) * width() + (x - a)) + slot;
    }
    int64_t vertex_index(int64_t x, int64_t y) const {
        return (y - c) * (width() + 1) + (x - a);
    }
};

struct EdgeRef {
    int64_t x = 0, y = 0;
    int slot = 0;  // 0: (x,y)-(x+1,y), 1: (x,y)-(x,y+1)
};

EdgeRef edge_at(const Rectangle& r, int64_t idx);

// Open probability of one edge. Horizontal edges of the column-index grid
// need the gap behind column x+1, so the environment must hold at least x+2
// columns; dilute needs an integer environment reaching past x.
double edge_prob(const EdgeRef& e, const EnvironmentWindow& env, double p, Formulation f);

using Vertex = std::pair<int64_t, int64_t>;

struct PercWindow {
    Formulation formulation = Formulation::dilute;
    double p = 0.0;
    Rectangle region;
    EnvironmentWindow env;
    bool has_rng = false;
    uint64_t seed = 0;
    uint64_t stream = 0;
    std::vector<double> uniforms;  // one per edge, region indexing
    std::vector<uint8_t> open;     // open(e) = 1 iff uniforms(e) < p_e

    bool is_open(int64_t eidx) const { return open[size_t(eidx)] != 0; }
    int64_t open_count() const;
    double prob_of(int64_t eidx) const;
    // Reuses the stored uniforms, so open sets are monotone across p.
    void rethreshold(double p_new);
    void dump(std::ostream& os) const;
};

// Materialization cap; larger windows go through the streamed samplers below.
inline constexpr int64_t kMaxWindowEdges = int64_t(1) << 24;

PercWindow sample_window(const EnvironmentWindow& env, double p, const Rectangle& region,
                         Formulation f, RngStream& rng);

// Builds a window around a prescribed open-bit vector (uniforms synthesized
// consistently); rejects bits that force an impossible edge (p_e = 0, bit 1).
PercWindow window_from_bits(const EnvironmentWindow& env, double p, const Rectangle& region,
                            Formulation f, const std::vector<uint8_t>& bits);

PercWindow parse_window(std::istream& is);

bool connected(const PercWindow& w, const std::vector<Vertex>& A, const std::vector<Vertex>& B);

// Connectivity using only the edge set of sub (itself a trimmed rectangle
// inside w.region). Fills witness with an open path when given.
bool connected_in(const PercWindow& w, const Rectangle& sub, const std::vector<Vertex>& A,
                  const std::vector<Vertex>& B, std::vector<Vertex>* witness = nullptr);

struct CrossingReport {
    std::string event;
    bool indicator = false;
    std::vector<Vertex> witness;
};

// direction 'h': left side {a} x [c,d] to right side {b} x [c,d];
// direction 'v': bottom [a,b] x {c} to top [a,b] x {d}; edges of r only.
CrossingReport crossing(const PercWindow& w, const Rectangle& r, char direction,
                        bool want_witness = false);

// Exhaustive enumeration over all configurations of r's edge set (<= 24 edges).
double exact_crossing_prob(const EnvironmentWindow& env, double p, const Rectangle& r,
                           Formulation f, char direction);

// One crossing indicator drawn on the fly with O(width) frontier memory;
// uniforms are keyed by r's edge indices through rng.uniform_at, so the same
// stream reproduces the same configuration. Row sweep with early exit: a
// vertical sweep stops once the bottom-connected frontier dies, a horizontal
// one stops as soon as some component touches both sides.
bool streamed_crossing_sample(const EnvironmentWindow& env, double p, const Rectangle& r,
                              Formulation f, char direction, RngStream& rng);

// Origin-to-boundary probe for the nested-window decay curve: true iff (0,0)
// reaches a vertex with max(x,y) = N inside the sub-box [0,N]^2 of ambient.
// Uniforms are keyed by ambient edge indices, so probes at different N under
// one stream share edge states and the indicator is non-increasing in N.
bool streamed_origin_probe(const EnvironmentWindow& env, double p, const Rectangle& ambient,
                           Formulation f, int64_t N, RngStream& rng);

}  // namespace stretchperc
