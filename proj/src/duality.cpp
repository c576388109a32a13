#include "stretchperc/duality.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stretchperc/io.hpp"

namespace stretchperc {

namespace {

// Guards against float dust in pmf sums; 1/2 itself is exact.
constexpr double kMedian = 0.5 - 1e-12;

// Largest support point s <= bound with P(xi >= s) >= 1/2, or 0 if none.
// The survival function is nonincreasing, so on the integer-supported kinds
// a binary search over {1..floor(bound)} finds the last point that still
// carries half the mass.
double best_support_point(const InterarrivalSpec& spec, double bound) {
    switch (spec.kind()) {
        case GapKind::deterministic: {
            double v = spec.det_value();
            return (v > 0 && v <= bound) ? v : 0.0;  // P(xi >= v) = 1
        }
        case GapKind::geometric:
        case GapKind::zeta: {
            if (bound < 1.0) return 0.0;
            int64_t lo = 1;  // P(xi >= 1) = 1
            int64_t hi = bound >= 4.0e18 ? int64_t(4000000000000000000) : int64_t(std::floor(bound));
            while (lo < hi) {
                int64_t mid = lo + (hi - lo + 1) / 2;
                if (spec.survival_geq(double(mid)) >= kMedian)
                    lo = mid;
                else
                    hi = mid - 1;
            }
            return double(lo);
        }
        case GapKind::finite_pmf: {
            double best = 0.0;
            for (const auto& vp : spec.table())
                if (vp.first <= bound && spec.survival_geq(vp.first) >= kMedian)
                    best = std::max(best, vp.first);
            return best;
        }
        case GapKind::scaled: {
            double m = spec.multiplier();
            double s = best_support_point(spec.inner(), bound / m);
            return s > 0 ? s * m : 0.0;
        }
    }
    throw SpecError("unknown gap kind");
}

}  // namespace

double choose_kappa(const InterarrivalSpec& spec) {
    if (spec.survival_geq(1.0) >= kMedian) return 1.0;
    double s = best_support_point(spec, 1.0);
    // s = 0 cannot happen for a positive gap law: P(xi >= 1) < 1/2 puts more
    // than half the mass on support points below 1, and the smallest of those
    // carries full survival. Kept as a guard against malformed tables.
    if (s <= 0.0) throw SpecError("no kappa in (0,1] has P(xi >= kappa) >= 1/2");
    return s;
}

ContractionResult contract(const EnvironmentWindow& env, double kappa) {
    if (!(kappa > 0.0) || kappa > 1.0) throw SpecError("kappa must lie in (0,1]");
    ContractionResult out;
    out.kappa = kappa;
    std::vector<double> g = env.gaps();
    for (size_t i = 0; i < g.size(); ++i)
        if (g[i] >= kappa) out.J.push_back(int64_t(i) + 1);
    int64_t prev = 0;
    for (int64_t j : out.J) {
        out.zeta.push_back(j - prev);
        prev = j;
    }
    std::vector<double> zeta_gaps(out.zeta.begin(), out.zeta.end());
    out.Xi = environment_from_gaps(-0.5, zeta_gaps);
    if (out.J.empty())
        out.diagnostic = "no gap reaches kappa = " + fmt_double(kappa) + " within the window";
    return out;
}

double contracted_edge_prob(const ContractionResult& ctr, double p, const EdgeRef& e) {
    if (!(p >= 0.0 && p <= 1.0)) throw SpecError("p must lie in [0,1]");
    double hk = std::pow(p, ctr.kappa);
    if (e.slot == 0) return hk;
    if (e.slot != 1) throw SpecError("slot must be 0 (horizontal) or 1 (vertical)");
    if (e.x == 0) return 0.0;  // zeta_0 = 0: column 0 carries no verticals
    if (e.x < 0 || size_t(e.x) > ctr.zeta.size())
        throw SpecError("contraction does not cover column " + std::to_string(e.x));
    return 1.0 - std::pow(1.0 - hk, double(ctr.zeta[size_t(e.x) - 1]));
}

PercWindow sample_contracted(const ContractionResult& ctr, double p, const Rectangle& region,
                             RngStream& rng) {
    if (!(p >= 0.0 && p <= 1.0)) throw SpecError("p must lie in [0,1]");
    if (region.a < 0 || region.c < 0)
        throw SpecError("contracted windows live in the first quadrant");
    if (region.n_edges() > kMaxWindowEdges)
        throw SpecError("window exceeds the materialization cap");
    if (int64_t(ctr.zeta.size()) < region.b - 1)
        throw SpecError("contraction does not cover the region: need zeta through column " +
                        std::to_string(region.b - 1));
    PercWindow w;
    w.formulation = Formulation::dilute;  // nominal tag; see the header note
    w.p = p;
    w.region = region;
    w.env = ctr.Xi;
    w.has_rng = false;
    int64_t m = region.n_edges();
    w.uniforms.resize(size_t(m));
    w.open.resize(size_t(m));
    double hk = std::pow(p, ctr.kappa);
    std::vector<double> vprob(size_t(region.b - region.a));
    for (int64_t x = region.a; x < region.b; ++x)
        vprob[size_t(x - region.a)] =
            x == 0 ? 0.0 : 1.0 - std::pow(1.0 - hk, double(ctr.zeta[size_t(x) - 1]));
    for (int64_t i = 0; i < m; ++i) {
        EdgeRef e = edge_at(region, i);
        double pe = e.slot == 0 ? hk : vprob[size_t(e.x - region.a)];
        double u = rng.uniform_at(uint64_t(i));
        w.uniforms[size_t(i)] = u;
        w.open[size_t(i)] = u < pe ? 1 : 0;
    }
    return w;
}

bool DualWindow::v_open(int64_t dx, int64_t dy) const {
    if (dx < 0 || dx > W || dy < 0 || dy >= H) throw SpecError("dual vertical out of range");
    return vopen[size_t(dy * (W + 1) + dx)] != 0;
}

bool DualWindow::h_open(int64_t dx, int64_t dy) const {
    if (dx < 0 || dx >= W || dy < 0 || dy > H) throw SpecError("dual horizontal out of range");
    return hopen[size_t(dy * W + dx)] != 0;
}

DualWindow dualize(const PercWindow& primal, const ContractionResult& ctr, RngStream& rng) {
    const Rectangle& r = primal.region;
    if (r.a != 0 || r.c != 0)
        throw SpecError("mismatched window shapes: the dual hangs on the coordinate axes, so "
                        "the window must start at (0,0)");
    int64_t W = r.b, H = r.d;
    if (int64_t(ctr.zeta.size()) < W - 1)
        throw SpecError("contraction does not cover the window: need zeta through column " +
                        std::to_string(W - 1));
    DualWindow dw;
    dw.primal = primal;
    dw.kappa = ctr.kappa;
    dw.p_dual = 1.0 - std::pow(primal.p, ctr.kappa);
    dw.W = W;
    dw.H = H;
    dw.zeta.assign(size_t(W), 0);
    for (int64_t x = 1; x < W; ++x) dw.zeta[size_t(x)] = ctr.zeta[size_t(x - 1)];
    dw.vopen.assign(size_t((W + 1) * H), 0);
    dw.hopen.assign(size_t(W * (H + 1)), 0);
    // The two semiaxes cross no primal edge and are sampled fresh,
    // sequentially: left verticals by ascending dy, then bottom horizontals
    // by ascending dx. The corner edge has exponent zeta_0 = 0, so it is open
    // almost surely.
    for (int64_t dy = 0; dy < H; ++dy)
        dw.vopen[size_t(dy * (W + 1))] = rng.next_uniform() < dw.p_dual ? 1 : 0;
    for (int64_t dx = 0; dx < W; ++dx)
        dw.hopen[size_t(dx)] =
            rng.next_uniform() < std::pow(dw.p_dual, double(dw.zeta[size_t(dx)])) ? 1 : 0;
    // Interior dual edges are open iff the primal edge they cross is closed.
    for (int64_t dy = 0; dy < H; ++dy)
        for (int64_t dx = 1; dx <= W; ++dx)
            dw.vopen[size_t(dy * (W + 1) + dx)] =
                primal.is_open(r.edge_index(dx - 1, dy, 0)) ? 0 : 1;
    for (int64_t dy = 1; dy <= H; ++dy)
        for (int64_t dx = 0; dx < W; ++dx)
            dw.hopen[size_t(dy * W + dx)] = primal.is_open(r.edge_index(dx, dy - 1, 1)) ? 0 : 1;
    return dw;
}

double dual_edge_prob(const DualWindow& dw, int64_t dx, int64_t dy, int slot) {
    if (slot == 1) {
        if (dx < 0 || dx > dw.W || dy < 0 || dy >= dw.H)
            throw SpecError("dual vertical out of range");
        return dw.p_dual;
    }
    if (slot != 0) throw SpecError("slot must be 0 (horizontal) or 1 (vertical)");
    if (dx < 0 || dx >= dw.W || dy < 0 || dy > dw.H)
        throw SpecError("dual horizontal out of range");
    return std::pow(dw.p_dual, double(dw.zeta[size_t(dx)]));
}

BlockingReport blocking_check(const PercWindow& primal, const DualWindow& dual,
                              const Rectangle& box) {
    if (box.a < 1 || box.c < 1)
        throw SpecError("box touches the coordinate axes; its dual would need semiaxis edges, "
                        "which cross nothing");
    if (!primal.region.contains_rect(box)) throw SpecError("box exceeds the window");
    if (primal.region.a != 0 || primal.region.c != 0 || dual.W != primal.region.b ||
        dual.H != primal.region.d)
        throw SpecError("mismatched window shapes");

    BlockingReport rep;
    rep.primal_cv = crossing(primal, box, 'v').indicator;

    // The duals of the box's edges form a box of their own: horizontals
    // (dx,dy)-(dx+1,dy) with dx in [a,b-1], dy in [c+1,d] cross the box's
    // verticals, verticals (dx,dy)-(dx,dy+1) with dx in [a+1,b], dy in [c,d-1]
    // cross its horizontals. A left-right crossing of that box (column a to
    // column b) severs every bottom-top path and conversely.
    int64_t nx = box.b - box.a + 1;
    std::vector<uint8_t> seen(size_t(nx * (box.d - box.c + 1)), 0);
    auto idx = [&](int64_t dx, int64_t dy) { return size_t((dy - box.c) * nx + (dx - box.a)); };
    std::deque<std::pair<int64_t, int64_t>> q;
    for (int64_t dy = box.c + 1; dy <= box.d; ++dy) {
        seen[idx(box.a, dy)] = 1;
        q.push_back({box.a, dy});
    }
    bool hit = false;
    auto try_push = [&](int64_t dx, int64_t dy) {
        if (seen[idx(dx, dy)]) return;
        seen[idx(dx, dy)] = 1;
        if (dx == box.b) hit = true;
        q.push_back({dx, dy});
    };
    while (!q.empty() && !hit) {
        auto [dx, dy] = q.front();
        q.pop_front();
        if (dy >= box.c + 1 && dx + 1 <= box.b && dual.h_open(dx, dy)) try_push(dx + 1, dy);
        if (dy >= box.c + 1 && dx - 1 >= box.a && dual.h_open(dx - 1, dy)) try_push(dx - 1, dy);
        if (dx >= box.a + 1 && dy + 1 <= box.d && dual.v_open(dx, dy)) try_push(dx, dy + 1);
        if (dx >= box.a + 1 && dy - 1 >= box.c && dual.v_open(dx, dy - 1)) try_push(dx, dy - 1);
    }
    rep.dual_ch = hit;
    rep.xor_holds = rep.primal_cv != rep.dual_ch;
    return rep;
}

bool semicircuit_probe(const DualWindow& dual, int64_t r) {
    if (r < 1 || r > std::min(dual.W, dual.H))
        throw SpecError("probe radius must lie in [1, min(W,H)]");
    // BFS over the dual vertices of [0,r]^2 only: a path wandering further out
    // could not separate the origin from the distance-r boundary.
    int64_t n = r + 1;
    std::vector<uint8_t> seen(size_t(n * n), 0);
    auto idx = [&](int64_t dx, int64_t dy) { return size_t(dy * n + dx); };
    seen[idx(0, 0)] = 1;  // the corner vertex stays off limits
    std::deque<std::pair<int64_t, int64_t>> q;
    for (int64_t dy = 1; dy <= r; ++dy) {
        seen[idx(0, dy)] = 1;
        q.push_back({0, dy});
    }
    bool hit = false;
    auto try_push = [&](int64_t dx, int64_t dy) {
        if (seen[idx(dx, dy)]) return;
        seen[idx(dx, dy)] = 1;
        if (dy == 0) hit = true;  // dx >= 1 here: (0,0) is pre-marked
        q.push_back({dx, dy});
    };
    while (!q.empty() && !hit) {
        auto [dx, dy] = q.front();
        q.pop_front();
        if (dx + 1 <= r && dual.h_open(dx, dy)) try_push(dx + 1, dy);
        if (dx - 1 >= 0 && dual.h_open(dx - 1, dy)) try_push(dx - 1, dy);
        if (dy + 1 <= r && dual.v_open(dx, dy)) try_push(dx, dy + 1);
        if (dy - 1 >= 0 && dual.v_open(dx, dy - 1)) try_push(dx, dy - 1);
    }
    return hit;
}

namespace {

void dump_bits_rle(std::ostream& os, const std::vector<uint8_t>& bits) {
    os << " rle";
    // alternating run lengths, first run counts closed edges
    size_t i = 0, m = bits.size();
    uint8_t want = 0;
    while (i < m) {
        int64_t run = 0;
        while (i < m && bits[i] == want) ++run, ++i;
        os << " " << run;
        want ^= 1;
    }
    os << "\n";
}

std::string next_line(std::istream& is) {
    std::string line;
    while (std::getline(is, line)) {
        line = trim(line);
        if (!line.empty()) return line;
    }
    throw SpecError("dual dump truncated");
}

std::vector<uint8_t> parse_bits_rle(const std::string& body, int64_t expect) {
    std::istringstream ss(body);
    int64_t m;
    std::string tag;
    if (!(ss >> m >> tag) || tag != "rle" || m != expect)
        throw SpecError("dual dump: bad bit section");
    std::vector<uint8_t> bits(size_t(m), 0);
    int64_t at = 0;
    uint8_t want = 0;
    int64_t run;
    while (ss >> run) {
        if (run < 0 || at + run > m) throw SpecError("dual dump: bad rle runs");
        std::fill(bits.begin() + at, bits.begin() + at + run, want);
        at += run;
        want ^= 1;
    }
    if (at != m) throw SpecError("dual dump: rle runs do not cover the section");
    return bits;
}

}  // namespace

void dump_dual(const DualWindow& dw, std::ostream& os) {
    os << "dualwindow v1\n";
    os << "p " << fmt_double(dw.primal.p) << "\n";
    os << "kappa " << fmt_double(dw.kappa) << "\n";
    os << "extent " << dw.W << " " << dw.H << "\n";
    os << "zeta " << dw.W;
    for (int64_t z : dw.zeta) os << " " << z;
    os << "\n";
    os << "xi " << (dw.primal.env.integer_valued ? 1 : 0) << " " << dw.primal.env.count();
    for (double c : dw.primal.env.columns) os << " " << fmt_double(c);
    os << "\n";
    // interiors, row-major with dy outer; the semiaxes travel separately
    std::vector<uint8_t> bits;
    bits.reserve(size_t(dw.W * dw.H));
    for (int64_t dy = 0; dy < dw.H; ++dy)
        for (int64_t dx = 1; dx <= dw.W; ++dx) bits.push_back(dw.v_open(dx, dy) ? 1 : 0);
    os << "interior_v " << bits.size();
    dump_bits_rle(os, bits);
    bits.clear();
    for (int64_t dy = 1; dy <= dw.H; ++dy)
        for (int64_t dx = 0; dx < dw.W; ++dx) bits.push_back(dw.h_open(dx, dy) ? 1 : 0);
    os << "interior_h " << bits.size();
    dump_bits_rle(os, bits);
    bits.clear();
    for (int64_t dy = 0; dy < dw.H; ++dy) bits.push_back(dw.v_open(0, dy) ? 1 : 0);
    os << "semiaxis_left " << bits.size();
    dump_bits_rle(os, bits);
    bits.clear();
    for (int64_t dx = 0; dx < dw.W; ++dx) bits.push_back(dw.h_open(dx, 0) ? 1 : 0);
    os << "semiaxis_bottom " << bits.size();
    dump_bits_rle(os, bits);
    os << "end\n";
}

DualWindow parse_dual(std::istream& is) {
    if (next_line(is) != "dualwindow v1") throw SpecError("not a dualwindow v1 dump");
    auto expect_key = [](const std::string& line, const std::string& key) {
        if (line.rfind(key + " ", 0) != 0) throw SpecError("dual dump: expected " + key);
        return line.substr(key.size() + 1);
    };
    double p = parse_double_strict(expect_key(next_line(is), "p"));
    double kappa = parse_double_strict(expect_key(next_line(is), "kappa"));
    if (!(p >= 0.0 && p <= 1.0)) throw SpecError("dual dump: p outside [0,1]");
    if (!(kappa > 0.0) || kappa > 1.0) throw SpecError("dual dump: kappa outside (0,1]");
    std::istringstream ext(expect_key(next_line(is), "extent"));
    int64_t W, H;
    if (!(ext >> W >> H) || W < 1 || H < 1) throw SpecError("dual dump: bad extent");

    std::istringstream zs(expect_key(next_line(is), "zeta"));
    int64_t nz;
    if (!(zs >> nz) || nz != W) throw SpecError("dual dump: bad zeta line");
    std::vector<int64_t> zeta(size_t(W), 0);
    for (int64_t i = 0; i < W; ++i)
        if (!(zs >> zeta[size_t(i)])) throw SpecError("dual dump: short zeta line");
    if (zeta[0] != 0) throw SpecError("dual dump: zeta_0 must be 0");
    for (int64_t i = 1; i < W; ++i)
        if (zeta[size_t(i)] < 1) throw SpecError("dual dump: zeta must be positive from column 1");

    std::istringstream es(expect_key(next_line(is), "xi"));
    int int_flag;
    size_t ncols;
    if (!(es >> int_flag >> ncols) || ncols == 0) throw SpecError("dual dump: bad xi line");
    EnvironmentWindow xi;
    xi.integer_valued = int_flag != 0;
    xi.columns.resize(ncols);
    for (size_t i = 0; i < ncols; ++i)
        if (!(es >> xi.columns[i])) throw SpecError("dual dump: short xi line");

    std::vector<uint8_t> iv = parse_bits_rle(expect_key(next_line(is), "interior_v"), W * H);
    std::vector<uint8_t> ih = parse_bits_rle(expect_key(next_line(is), "interior_h"), W * H);
    std::vector<uint8_t> sl = parse_bits_rle(expect_key(next_line(is), "semiaxis_left"), H);
    std::vector<uint8_t> sb = parse_bits_rle(expect_key(next_line(is), "semiaxis_bottom"), W);
    if (next_line(is) != "end") throw SpecError("dual dump: missing end marker");

    DualWindow dw;
    dw.kappa = kappa;
    dw.p_dual = 1.0 - std::pow(p, kappa);
    dw.W = W;
    dw.H = H;
    dw.zeta = zeta;
    dw.vopen.assign(size_t((W + 1) * H), 0);
    dw.hopen.assign(size_t(W * (H + 1)), 0);
    for (int64_t dy = 0; dy < H; ++dy) {
        dw.vopen[size_t(dy * (W + 1))] = sl[size_t(dy)];
        for (int64_t dx = 1; dx <= W; ++dx)
            dw.vopen[size_t(dy * (W + 1) + dx)] = iv[size_t(dy * W + (dx - 1))];
    }
    for (int64_t dx = 0; dx < W; ++dx) dw.hopen[size_t(dx)] = sb[size_t(dx)];
    for (int64_t dy = 1; dy <= H; ++dy)
        for (int64_t dx = 0; dx < W; ++dx)
            dw.hopen[size_t(dy * W + dx)] = ih[size_t((dy - 1) * W + dx)];

    // The primal window is the complement of the interior, with uniforms
    // synthesized against the contracted law (same scheme as window_from_bits).
    PercWindow pw;
    pw.formulation = Formulation::dilute;  // nominal tag, as in sample_contracted
    pw.p = p;
    pw.region = Rectangle(0, W, 0, H);
    pw.env = xi;
    pw.has_rng = false;
    int64_t m = pw.region.n_edges();
    pw.uniforms.resize(size_t(m));
    pw.open.resize(size_t(m));
    double hk = std::pow(p, kappa);
    for (int64_t i = 0; i < m; ++i) {
        EdgeRef e = edge_at(pw.region, i);
        bool open;
        double pe;
        if (e.slot == 0) {
            open = iv[size_t(e.y * W + e.x)] == 0;  // dual vertical at (x+1, y)
            pe = hk;
        } else {
            open = ih[size_t(e.y * W + e.x)] == 0;  // dual horizontal at (x, y+1)
            pe = e.x == 0 ? 0.0 : 1.0 - std::pow(1.0 - hk, double(zeta[size_t(e.x)]));
        }
        if (open && pe <= 0.0)
            throw SpecError("dual dump: interior forces an impossible primal edge open");
        pw.uniforms[size_t(i)] = open ? pe * 0.5 : pe + (1.0 - pe) * 0.5;
        pw.open[size_t(i)] = open ? 1 : 0;
    }
    dw.primal = std::move(pw);
    return dw;
}

}  // namespace stretchperc
