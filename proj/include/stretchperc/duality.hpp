#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "stretchperc/environment.hpp"
#include "stretchperc/interarrival.hpp"
#include "stretchperc/lattice.hpp"
#include "stretchperc/rng.hpp"

namespace stretchperc {

// Largest kappa in (0,1] with P(xi >= kappa) >= 1/2. The survival function
// only steps at support points, so the maximum is attained at 1 or at a
// support value <= 1.
double choose_kappa(const InterarrivalSpec& spec);

// J_k = position of the k-th gap >= kappa (gaps numbered from 1), and
// zeta_k = J_k - J_{k-1} with J_0 = 0; zeta_k - 1 counts the small gaps
// between consecutive large ones. Xi accumulates the zeta increments from
// -1/2, which is where the dual lattice hangs them.
struct ContractionResult {
    double kappa = 0;
    std::vector<int64_t> J;
    std::vector<int64_t> zeta;  // zeta[k-1] holds zeta_k; zeta_0 = 0 stays implicit
    EnvironmentWindow Xi;
    std::string diagnostic;  // set when the window holds no gap >= kappa
    bool empty() const { return J.empty(); }
};
ContractionResult contract(const EnvironmentWindow& env, double kappa);

// Per-edge law of the contracted model: horizontals open with p^kappa, the
// vertical at column x with 1 - (1-p^kappa)^{zeta_x}; column 0 carries none
// (zeta_0 = 0).
double contracted_edge_prob(const ContractionResult& ctr, double p, const EdgeRef& e);

// Samples the contracted model on region from its per-edge law, uniforms
// keyed by edge index. The result's formulation tag is nominal (the window's
// probabilities are not expressible through edge_prob, so has_rng stays false
// and rethresholding throws on the half-integer environment); connectivity
// and crossing queries read only the bits and work as usual. w.p stores the
// base parameter p, not p^kappa.
PercWindow sample_contracted(const ContractionResult& ctr, double p, const Rectangle& region,
                             RngStream& rng);

// Dual of a contracted window on [0,W) x [0,H). Dual vertex (dx,dy) sits at
// (dx-1/2, dy-1/2); interior dual edges are open iff the primal edge they
// cross is closed, and the two semiaxes (dx = 0 verticals, dy = 0
// horizontals) are sampled fresh: verticals with 1 - p^kappa, the bottom
// horizontal at dx with (1-p^kappa)^{zeta_dx} (the corner edge dx = 0 is
// almost surely open).
struct DualWindow {
    PercWindow primal;
    double kappa = 0;
    double p_dual = 0;           // 1 - p^kappa
    std::vector<int64_t> zeta;   // size W, zeta[0] = 0
    int64_t W = 0, H = 0;
    std::vector<uint8_t> vopen;  // verticals (dx,dy)-(dx,dy+1): dx in [0,W], dy in [0,H-1]
    std::vector<uint8_t> hopen;  // horizontals (dx,dy)-(dx+1,dy): dx in [0,W-1], dy in [0,H]

    bool v_open(int64_t dx, int64_t dy) const;
    bool h_open(int64_t dx, int64_t dy) const;
};
DualWindow dualize(const PercWindow& primal, const ContractionResult& ctr, RngStream& rng);

// Marginal open probability of a dual edge: slot 0 = horizontal out of
// (dx,dy), slot 1 = vertical. Matches the law of the direct model with
// parameter 1 - p^kappa and environment Xi.
double dual_edge_prob(const DualWindow& dw, int64_t dx, int64_t dy, int slot);

struct BlockingReport {
    bool primal_cv = false;  // vertical crossing of the box
    bool dual_ch = false;    // horizontal crossing of the matching dual box
    bool xor_holds = false;
};
// The dual box's edges are the duals of exactly the box's edges; in every
// configuration exactly one of the two crossings occurs. Boxes touching the
// coordinate axes are refused: their duals would involve semiaxis edges,
// which cross nothing.
BlockingReport blocking_check(const PercWindow& primal, const DualWindow& dual,
                              const Rectangle& box);

// Open dual path from the left semiaxis {(0,dy): dy >= 1} to the bottom
// semiaxis {(dx,0): dx >= 1} inside the [0,r]^2 corner of the dual window,
// never touching the corner vertex (0,0). Such a path encloses the origin,
// so it occurs iff the origin fails to reach the distance-r boundary in the
// primal window.
bool semicircuit_probe(const DualWindow& dual, int64_t r);

// Textual serialization: header, zeta line, interior bitmaps (complement of
// the primal), then the semiaxis section.
void dump_dual(const DualWindow& dw, std::ostream& os);
DualWindow parse_dual(std::istream& is);

}  // namespace stretchperc
