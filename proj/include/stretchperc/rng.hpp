#pragma once
#include <array>
#include <cstdint>

namespace stretchperc {

// Philox4x64-10 counter-based generator (Random123 family). A stream is keyed
// by (master seed, stream id); draw i is a pure function of (key, i), so draws
// are addressable, replicas with distinct stream ids are independent, and
// re-reading the same index always gives the same value.
struct Philox4x64 {
    static std::array<uint64_t, 4> block(uint64_t c0, uint64_t c1, uint64_t c2,
                                         uint64_t c3, uint64_t k0, uint64_t k1);
};

class RngStream {
public:
    RngStream() : RngStream(0, 0) {}
    RngStream(uint64_t master_seed, uint64_t stream_id)
        : key0_(master_seed), key1_(stream_id) {}

    uint64_t master_seed() const { return key0_; }
    uint64_t stream_id() const { return key1_; }

    // addressable draws
    uint64_t u64_at(uint64_t index) const;
    double uniform_at(uint64_t index) const { return to_unit(u64_at(index)); }

    // sequential draws
    uint64_t next_u64() { return u64_at(pos_++); }
    double next_uniform() { return to_unit(next_u64()); }
    uint64_t position() const { return pos_; }
    void seek(uint64_t index) { pos_ = index; }

    // geometric(q) on {1,2,...} and Bernoulli(p), sequential
    bool next_bernoulli(double p) { return next_uniform() < p; }

    // derived stream for a sub-task; pure function of (key, sub_id)
    RngStream child(uint64_t sub_id) const;

    static double to_unit(uint64_t x) { return (x >> 11) * 0x1.0p-53; }

private:
    uint64_t key0_, key1_;
    uint64_t pos_ = 0;
    mutable uint64_t cached_block_ = ~0ull;
    mutable std::array<uint64_t, 4> cache_{};
};

}  // namespace stretchperc
