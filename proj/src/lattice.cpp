#include "stretchperc/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <ostream>
#include <sstream>

#include "stretchperc/interarrival.hpp"
#include "stretchperc/io.hpp"

namespace stretchperc {

UnionFind::UnionFind(int64_t n) : parent_(size_t(n), -1) {
    if (n < 0) throw SpecError("union-find size must be nonnegative");
}

int64_t UnionFind::find(int64_t v) {
    while (parent_[size_t(v)] >= 0) {
        int64_t up = parent_[size_t(v)];
        if (parent_[size_t(up)] >= 0) {  // path halving
            parent_[size_t(v)] = parent_[size_t(up)];
            v = parent_[size_t(up)];
        } else {
            return up;
        }
    }
    return v;
}

bool UnionFind::unite(int64_t a, int64_t b) {
    int64_t ra = find(a), rb = find(b);
    if (ra == rb) return false;
    if (parent_[size_t(ra)] > parent_[size_t(rb)]) std::swap(ra, rb);
    parent_[size_t(ra)] += parent_[size_t(rb)];
    parent_[size_t(rb)] = ra;
    return true;
}

void UnionFind::reset() { std::fill(parent_.begin(), parent_.end(), -1); }

const char* formulation_name(Formulation f) {
    switch (f) {
        case Formulation::stretched_lengths: return "stretched_lengths";
        case Formulation::inhomogeneous: return "inhomogeneous";
        case Formulation::dilute: return "dilute";
    }
    throw SpecError("unknown formulation");
}

Formulation parse_formulation(const std::string& name) {
    if (name == "stretched_lengths") return Formulation::stretched_lengths;
    if (name == "inhomogeneous") return Formulation::inhomogeneous;
    if (name == "dilute") return Formulation::dilute;
    throw SpecError("unknown formulation: " + name);
}

Rectangle::Rectangle(int64_t a_, int64_t b_, int64_t c_, int64_t d_) : a(a_), b(b_), c(c_), d(d_) {
    if (a >= b || c >= d) throw SpecError("degenerate rectangle: need a < b and c < d");
}

EdgeRef edge_at(const Rectangle& r, int64_t idx) {
    if (idx < 0 || idx >= r.n_edges()) throw SpecError("edge index out of range");
    int64_t cell = idx / 2;
    EdgeRef e;
    e.slot = int(idx % 2);
    e.x = r.a + cell % r.width();
    e.y = r.c + cell / r.width();
    return e;
}

double edge_prob(const EdgeRef& e, const EnvironmentWindow& env, double p, Formulation f) {
    if (e.x < 0 || e.y < 0) throw SpecError("edge outside the quadrant");
    if (f == Formulation::dilute) {
        if (!env.integer_valued) throw SpecError("dilute formulation needs an integer environment");
        if (e.slot == 0) return p;
        if (double(e.x) > env.max_column())
            throw SpecError("dilute edge beyond the realized environment");
        return env.has_column_at(double(e.x)) ? p : 0.0;
    }
    if (e.slot == 1) return p;
    // horizontal (x,y)-(x+1,y) spans the gap behind column x+1
    if (size_t(e.x) + 1 >= env.count())
        throw SpecError("environment too short for horizontal edge");
    double gap = env.columns[size_t(e.x) + 1] - env.columns[size_t(e.x)];
    return std::pow(p, gap);
}

int64_t PercWindow::open_count() const {
    int64_t n = 0;
    for (uint8_t b : open) n += b;
    return n;
}

double PercWindow::prob_of(int64_t eidx) const {
    return edge_prob(edge_at(region, eidx), env, p, formulation);
}

void PercWindow::rethreshold(double p_new) {
    if (!(p_new >= 0.0 && p_new <= 1.0)) throw SpecError("p must lie in [0,1]");
    p = p_new;
    for (int64_t i = 0; i < region.n_edges(); ++i)
        open[size_t(i)] = uniforms[size_t(i)] < prob_of(i) ? 1 : 0;
}

static void check_window_args(const EnvironmentWindow& env, double p, const Rectangle& region,
                              Formulation f) {
    if (!(p >= 0.0 && p <= 1.0)) throw SpecError("p must lie in [0,1]");
    if (region.a < 0 || region.c < 0) throw SpecError("window must lie in the quadrant");
    if (env.count() == 0) throw SpecError("empty environment");
    if (f == Formulation::dilute) {
        if (!env.integer_valued) throw SpecError("dilute formulation needs an integer environment");
        if (env.max_column() < double(region.b - 1))
            throw SpecError("environment does not cover the window");
    } else if (env.count() < size_t(region.b) + 1) {
        throw SpecError("environment does not cover the window");
    }
}

PercWindow sample_window(const EnvironmentWindow& env, double p, const Rectangle& region,
                         Formulation f, RngStream& rng) {
    check_window_args(env, p, region, f);
    if (region.n_edges() > kMaxWindowEdges)
        throw SpecError("window too large to materialize; use the streamed samplers");
    PercWindow w;
    w.formulation = f;
    w.p = p;
    w.region = region;
    w.env = env;
    w.has_rng = true;
    w.seed = rng.master_seed();
    w.stream = rng.stream_id();
    int64_t m = region.n_edges();
    w.uniforms.resize(size_t(m));
    w.open.resize(size_t(m));
    for (int64_t i = 0; i < m; ++i) {
        w.uniforms[size_t(i)] = rng.uniform_at(uint64_t(i));
        w.open[size_t(i)] = w.uniforms[size_t(i)] < w.prob_of(i) ? 1 : 0;
    }
    return w;
}

PercWindow window_from_bits(const EnvironmentWindow& env, double p, const Rectangle& region,
                            Formulation f, const std::vector<uint8_t>& bits) {
    check_window_args(env, p, region, f);
    if (int64_t(bits.size()) != region.n_edges()) throw SpecError("bit vector size mismatch");
    PercWindow w;
    w.formulation = f;
    w.p = p;
    w.region = region;
    w.env = env;
    w.has_rng = false;
    w.uniforms.resize(bits.size());
    w.open.assign(bits.begin(), bits.end());
    for (int64_t i = 0; i < region.n_edges(); ++i) {
        double pe = w.prob_of(i);
        if (bits[size_t(i)]) {
            if (pe <= 0.0) throw SpecError("bit forces an edge whose probability is 0");
            w.uniforms[size_t(i)] = pe * 0.5;
        } else {
            w.uniforms[size_t(i)] = pe + (1.0 - pe) * 0.5;
        }
    }
    return w;
}

void PercWindow::dump(std::ostream& os) const {
    os << "percwindow v1\n";
    os << "formulation " << formulation_name(formulation) << "\n";
    os << "p " << fmt_double(p) << "\n";
    os << "region " << region.a << " " << region.b << " " << region.c << " " << region.d << "\n";
    if (has_rng)
        os << "rng " << seed << " " << stream << "\n";
    else
        os << "rng none\n";
    os << "env " << (env.integer_valued ? 1 : 0) << " " << env.count();
    for (double c : env.columns) os << " " << fmt_double(c);
    os << "\n";
    os << "open " << region.n_edges() << " rle";
    // alternating run lengths, first run counts closed edges
    int64_t i = 0, m = region.n_edges();
    uint8_t want = 0;
    while (i < m) {
        int64_t run = 0;
        while (i < m && open[size_t(i)] == want) ++run, ++i;
        os << " " << run;
        want ^= 1;
    }
    os << "\nend\n";
}

static std::string next_line(std::istream& is) {
    std::string line;
    while (std::getline(is, line)) {
        line = trim(line);
        if (!line.empty()) return line;
    }
    throw SpecError("window dump truncated");
}

PercWindow parse_window(std::istream& is) {
    if (next_line(is) != "percwindow v1") throw SpecError("not a percwindow v1 dump");
    auto expect_key = [](const std::string& line, const std::string& key) {
        if (line.rfind(key + " ", 0) != 0) throw SpecError("window dump: expected " + key);
        return line.substr(key.size() + 1);
    };
    Formulation f = parse_formulation(expect_key(next_line(is), "formulation"));
    double p = parse_double_strict(expect_key(next_line(is), "p"));
    std::istringstream reg(expect_key(next_line(is), "region"));
    int64_t a, b, c, d;
    if (!(reg >> a >> b >> c >> d)) throw SpecError("window dump: bad region");
    Rectangle region(a, b, c, d);

    std::string rng_line = expect_key(next_line(is), "rng");
    bool has_rng = rng_line != "none";
    uint64_t seed = 0, stream = 0;
    if (has_rng) {
        std::istringstream rs(rng_line);
        if (!(rs >> seed >> stream)) throw SpecError("window dump: bad rng line");
    }

    std::istringstream es(expect_key(next_line(is), "env"));
    int int_flag;
    size_t ncols;
    if (!(es >> int_flag >> ncols) || ncols == 0) throw SpecError("window dump: bad env line");
    EnvironmentWindow env;
    env.integer_valued = int_flag != 0;
    env.columns.resize(ncols);
    for (size_t i = 0; i < ncols; ++i)
        if (!(es >> env.columns[i])) throw SpecError("window dump: short env line");

    std::istringstream os_line(expect_key(next_line(is), "open"));
    int64_t m;
    std::string tag;
    if (!(os_line >> m >> tag) || tag != "rle" || m != region.n_edges())
        throw SpecError("window dump: bad open line");
    std::vector<uint8_t> bits(size_t(m), 0);
    int64_t at = 0;
    uint8_t want = 0;
    int64_t run;
    while (os_line >> run) {
        if (run < 0 || at + run > m) throw SpecError("window dump: bad rle runs");
        std::fill(bits.begin() + at, bits.begin() + at + run, want);
        at += run;
        want ^= 1;
    }
    if (at != m) throw SpecError("window dump: rle runs do not cover the edge set");
    if (next_line(is) != "end") throw SpecError("window dump: missing end marker");

    if (!has_rng) return window_from_bits(env, p, region, f, bits);
    RngStream rng(seed, stream);
    PercWindow w = sample_window(env, p, region, f, rng);
    if (w.open != bits) throw SpecError("window dump inconsistent with its seed");
    return w;
}

// BFS over the open edges of sub; local vertex ids are row-major over sub.
bool connected_in(const PercWindow& w, const Rectangle& sub, const std::vector<Vertex>& A,
                  const std::vector<Vertex>& B, std::vector<Vertex>* witness) {
    if (A.empty() || B.empty()) throw SpecError("connectivity query with an empty vertex set");
    if (!w.region.contains_rect(sub)) throw SpecError("sub-rectangle exceeds the window");
    auto check = [&](const Vertex& v) {
        if (!sub.contains_vertex(v.first, v.second))
            throw SpecError("vertex outside the queried rectangle");
    };
    for (const Vertex& v : A) check(v);
    for (const Vertex& v : B) check(v);

    int64_t W = sub.width() + 1, H = sub.height() + 1;
    auto lid = [&](int64_t x, int64_t y) { return (y - sub.c) * W + (x - sub.a); };
    std::vector<int32_t> state(size_t(W * H), 0);  // 0 fresh, 1 queued
    std::vector<int64_t> parent(size_t(W * H), -1);
    std::vector<uint8_t> target(size_t(W * H), 0);
    for (const Vertex& v : B) target[size_t(lid(v.first, v.second))] = 1;

    std::deque<int64_t> queue;
    for (const Vertex& v : A) {
        int64_t id = lid(v.first, v.second);
        if (!state[size_t(id)]) {
            state[size_t(id)] = 1;
            queue.push_back(id);
        }
    }
    auto is_open_edge = [&](int64_t x, int64_t y, int slot) {
        return w.is_open(w.region.edge_index(x, y, slot));
    };
    int64_t hit = -1;
    while (!queue.empty() && hit < 0) {
        int64_t id = queue.front();
        queue.pop_front();
        if (target[size_t(id)]) {
            hit = id;
            break;
        }
        int64_t x = sub.a + id % W, y = sub.c + id / W;
        auto push = [&](int64_t nx, int64_t ny) {
            int64_t nid = lid(nx, ny);
            if (!state[size_t(nid)]) {
                state[size_t(nid)] = 1;
                parent[size_t(nid)] = id;
                queue.push_back(nid);
            }
        };
        // edges of sub only: cell (x,y) must sit in [a,b-1] x [c,d-1]
        if (x + 1 <= sub.b && y <= sub.d - 1 && x <= sub.b - 1 && is_open_edge(x, y, 0))
            push(x + 1, y);
        if (x - 1 >= sub.a && y <= sub.d - 1 && is_open_edge(x - 1, y, 0)) push(x - 1, y);
        if (y + 1 <= sub.d && y <= sub.d - 1 && x <= sub.b - 1 && is_open_edge(x, y, 1))
            push(x, y + 1);
        if (y - 1 >= sub.c && x <= sub.b - 1 && is_open_edge(x, y - 1, 1)) push(x, y - 1);
    }
    if (hit < 0) return false;
    if (witness) {
        witness->clear();
        for (int64_t id = hit; id >= 0; id = parent[size_t(id)])
            witness->push_back({sub.a + id % W, sub.c + id / W});
        std::reverse(witness->begin(), witness->end());
    }
    return true;
}

bool connected(const PercWindow& w, const std::vector<Vertex>& A, const std::vector<Vertex>& B) {
    return connected_in(w, w.region, A, B, nullptr);
}

CrossingReport crossing(const PercWindow& w, const Rectangle& r, char direction,
                        bool want_witness) {
    if (!w.region.contains_rect(r)) throw SpecError("crossing rectangle exceeds the window");
    std::vector<Vertex> A, B;
    if (direction == 'h') {
        for (int64_t y = r.c; y <= r.d; ++y) A.push_back({r.a, y}), B.push_back({r.b, y});
    } else if (direction == 'v') {
        for (int64_t x = r.a; x <= r.b; ++x) A.push_back({x, r.c}), B.push_back({x, r.d});
    } else {
        throw SpecError("crossing direction must be 'h' or 'v'");
    }
    CrossingReport rep;
    rep.event = direction == 'h' ? "C_h" : "C_v";
    rep.indicator = connected_in(w, r, A, B, want_witness ? &rep.witness : nullptr);
    return rep;
}

double exact_crossing_prob(const EnvironmentWindow& env, double p, const Rectangle& r,
                           Formulation f, char direction) {
    check_window_args(env, p, r, f);
    int64_t m = r.n_edges();
    if (m > 24) throw SpecError("exhaustive enumeration capped at 24 edges");
    std::vector<double> probs(size_t(m), 0.0);
    for (int64_t i = 0; i < m; ++i) probs[size_t(i)] = edge_prob(edge_at(r, i), env, p, f);

    int64_t W = r.width() + 1;
    int64_t nv = r.n_vertices();
    auto vid = [&](int64_t x, int64_t y) { return (y - r.c) * W + (x - r.a); };
    UnionFind uf(nv);
    std::vector<int64_t> a_roots;
    a_roots.reserve(size_t(std::max(r.width(), r.height()) + 1));
    double total = 0.0;
    for (uint32_t mask = 0; mask < (uint32_t(1) << m); ++mask) {
        double weight = 1.0;
        for (int64_t i = 0; i < m; ++i)
            weight *= (mask >> i) & 1 ? probs[size_t(i)] : 1.0 - probs[size_t(i)];
        if (weight == 0.0) continue;
        uf.reset();
        for (int64_t i = 0; i < m; ++i) {
            if (!((mask >> i) & 1)) continue;
            EdgeRef e = edge_at(r, i);
            if (e.slot == 0)
                uf.unite(vid(e.x, e.y), vid(e.x + 1, e.y));
            else
                uf.unite(vid(e.x, e.y), vid(e.x, e.y + 1));
        }
        a_roots.clear();
        if (direction == 'h')
            for (int64_t y = r.c; y <= r.d; ++y) a_roots.push_back(uf.find(vid(r.a, y)));
        else
            for (int64_t x = r.a; x <= r.b; ++x) a_roots.push_back(uf.find(vid(x, r.c)));
        bool crossed = false;
        if (direction == 'h') {
            for (int64_t y = r.c; y <= r.d && !crossed; ++y) {
                int64_t root = uf.find(vid(r.b, y));
                crossed = std::find(a_roots.begin(), a_roots.end(), root) != a_roots.end();
            }
        } else {
            for (int64_t x = r.a; x <= r.b && !crossed; ++x) {
                int64_t root = uf.find(vid(x, r.d));
                crossed = std::find(a_roots.begin(), a_roots.end(), root) != a_roots.end();
            }
        }
        if (crossed) total += weight;
    }
    return total;
}

namespace {

// One row-sweep step shared by the streamed probes: frontier components are
// rebuilt from the previous row's partition, the verticals entering the new
// row, and the new row's horizontals.
struct RowSweep {
    int64_t W;                    // frontier slots 0..W
    std::vector<int64_t> comp;    // component id per slot, compact per row
    std::vector<uint32_t> tags;   // tag bits per component id
    std::vector<int64_t> scratch_first;
    UnionFind uf;

    explicit RowSweep(int64_t width) : W(width), uf(2 * (width + 1)) {}

    template <typename OpenVert, typename OpenHoriz>
    void advance(bool first_row, OpenVert&& vert_open, OpenHoriz&& horiz_open, bool has_horiz) {
        int64_t n = W + 1;
        uf.reset();
        if (!first_row) {
            // rebuild previous-row connectivity among slots 0..W
            scratch_first.assign(comp.size() + size_t(n), -1);
            std::vector<int64_t>& first_of = scratch_first;
            for (int64_t x = 0; x <= W; ++x) {
                int64_t cid = comp[size_t(x)];
                if (cid < 0) continue;
                if (first_of[size_t(cid)] < 0)
                    first_of[size_t(cid)] = x;
                else
                    uf.unite(first_of[size_t(cid)], x);
            }
            for (int64_t x = 0; x <= W; ++x)
                if (vert_open(x)) uf.unite(x, n + x);
        }
        if (has_horiz)
            for (int64_t x = 0; x < W; ++x)
                if (horiz_open(x)) uf.unite(n + x, n + x + 1);

        std::vector<uint32_t> new_tags;
        std::vector<int64_t> root_to_id(size_t(2 * n), -1);
        std::vector<int64_t> new_comp(size_t(n), -1);
        for (int64_t x = 0; x <= W; ++x) {
            int64_t root = uf.find(n + x);
            if (root_to_id[size_t(root)] < 0) {
                root_to_id[size_t(root)] = int64_t(new_tags.size());
                new_tags.push_back(0);
            }
            new_comp[size_t(x)] = root_to_id[size_t(root)];
        }
        if (!first_row) {
            for (int64_t x = 0; x <= W; ++x) {
                int64_t cid = comp[size_t(x)];
                if (cid < 0) continue;
                int64_t root = uf.find(x);
                int64_t nid = root_to_id[size_t(root)];
                if (nid >= 0) new_tags[size_t(nid)] |= tags[size_t(cid)];
            }
        }
        comp = std::move(new_comp);
        tags = std::move(new_tags);
    }

    void tag_slot(int64_t x, uint32_t bit) { tags[size_t(comp[size_t(x)])] |= bit; }
    uint32_t tag_at(int64_t x) const { return tags[size_t(comp[size_t(x)])]; }
    bool any_tag(uint32_t bit) const {
        for (uint32_t t : tags) if (t & bit) return true;
        return false;
    }
};

}  // namespace

bool streamed_crossing_sample(const EnvironmentWindow& env, double p, const Rectangle& r,
                              Formulation f, char direction, RngStream& rng) {
    check_window_args(env, p, r, f);
    if (direction != 'h' && direction != 'v') throw SpecError("direction must be 'h' or 'v'");
    int64_t W = r.width();
    std::vector<double> hprob(size_t(W), 0.0), vprob(size_t(W), 0.0);
    for (int64_t x = 0; x < W; ++x) {
        hprob[size_t(x)] = edge_prob({r.a + x, r.c, 0}, env, p, f);
        vprob[size_t(x)] = edge_prob({r.a + x, r.c, 1}, env, p, f);
    }
    RowSweep sweep(W);
    const uint32_t kBottom = 1, kLeft = 1, kRight = 2;
    for (int64_t y = r.c; y <= r.d; ++y) {
        bool first = y == r.c;
        bool has_horiz = y <= r.d - 1;
        int64_t cell_row = first ? r.c : y - 1;  // verticals entering row y
        auto vert_open = [&](int64_t x) {
            if (x >= W) return false;  // right side carries no vertical edges
            if (vprob[size_t(x)] <= 0.0) return false;
            return rng.uniform_at(uint64_t(r.edge_index(r.a + x, cell_row, 1))) < vprob[size_t(x)];
        };
        auto horiz_open = [&](int64_t x) {
            return rng.uniform_at(uint64_t(r.edge_index(r.a + x, y, 0))) < hprob[size_t(x)];
        };
        sweep.advance(first, vert_open, horiz_open, has_horiz);
        if (direction == 'v') {
            if (first)
                for (int64_t x = 0; x <= W; ++x) sweep.tag_slot(x, kBottom);
            if (y == r.d) return sweep.any_tag(kBottom);
            if (!sweep.any_tag(kBottom)) return false;  // bottom cluster died
        } else {
            sweep.tag_slot(0, kLeft);
            sweep.tag_slot(W, kRight);
            for (uint32_t t : sweep.tags)
                if ((t & kLeft) && (t & kRight)) return true;
        }
    }
    return false;
}

bool streamed_origin_probe(const EnvironmentWindow& env, double p, const Rectangle& ambient,
                           Formulation f, int64_t N, RngStream& rng) {
    check_window_args(env, p, ambient, f);
    if (N < 1) throw SpecError("origin probe needs N >= 1");
    if (ambient.a != 0 || ambient.c != 0 || ambient.b < N || ambient.d < N)
        throw SpecError("ambient rectangle must contain [0,N]^2 anchored at the origin");
    std::vector<double> hprob(size_t(N), 0.0), vprob(size_t(N), 0.0);
    for (int64_t x = 0; x < N; ++x) {
        hprob[size_t(x)] = edge_prob({x, 0, 0}, env, p, f);
        vprob[size_t(x)] = edge_prob({x, 0, 1}, env, p, f);
    }
    RowSweep sweep(N);
    const uint32_t kOrigin = 1, kReach = 2;  // kReach: touched the column x = N
    for (int64_t y = 0; y <= N; ++y) {
        bool first = y == 0;
        bool has_horiz = y <= N - 1;
        int64_t cell_row = first ? 0 : y - 1;
        auto vert_open = [&](int64_t x) {
            if (x >= N) return false;
            if (vprob[size_t(x)] <= 0.0) return false;
            return rng.uniform_at(uint64_t(ambient.edge_index(x, cell_row, 1))) < vprob[size_t(x)];
        };
        auto horiz_open = [&](int64_t x) {
            return rng.uniform_at(uint64_t(ambient.edge_index(x, y, 0))) < hprob[size_t(x)];
        };
        sweep.advance(first, vert_open, horiz_open, has_horiz);
        if (first) sweep.tag_slot(0, kOrigin);
        if (y == N) return sweep.any_tag(kOrigin);  // the whole top row is boundary
        sweep.tag_slot(N, kReach);
        for (uint32_t t : sweep.tags)
            if ((t & kOrigin) && (t & kReach)) return true;
        if (!sweep.any_tag(kOrigin)) return false;  // origin cluster sealed below
    }
    return false;
}

}  // namespace stretchperc
