#include "stretchperc/rng.hpp"

namespace stretchperc {

namespace {
constexpr uint64_t M0 = 0xD2E7470EE14C6C93ull;
constexpr uint64_t M1 = 0xCA5A826395121157ull;
constexpr uint64_t W0 = 0x9E3779B97F4A7C15ull;
constexpr uint64_t W1 = 0xBB67AE8584CAA73Bull;

inline void mulhilo(uint64_t a, uint64_t b, uint64_t& hi, uint64_t& lo) {
    __uint128_t prod = static_cast<__uint128_t>(a) * b;
    hi = static_cast<uint64_t>(prod >> 64);
    lo = static_cast<uint64_t>(prod);
}
}  // namespace

std::array<uint64_t, 4> Philox4x64::block(uint64_t c0, uint64_t c1, uint64_t c2,
                                          uint64_t c3, uint64_t k0, uint64_t k1) {
    for (int r = 0; r < 10; ++r) {
        if (r) {
            k0 += W0;
            k1 += W1;
        }
        uint64_t hi0, lo0, hi1, lo1;
        mulhilo(M0, c0, hi0, lo0);
        mulhilo(M1, c2, hi1, lo1);
        uint64_t n0 = hi1 ^ c1 ^ k0;
        uint64_t n1 = lo1;
        uint64_t n2 = hi0 ^ c3 ^ k1;
        uint64_t n3 = lo0;
        c0 = n0; c1 = n1; c2 = n2; c3 = n3;
    }
    return {c0, c1, c2, c3};
}

uint64_t RngStream::u64_at(uint64_t index) const {
    uint64_t blk = index >> 2;
    if (blk != cached_block_) {
        cache_ = Philox4x64::block(blk, 0, 0, 0, key0_, key1_);
        cached_block_ = blk;
    }
    return cache_[index & 3];
}

RngStream RngStream::child(uint64_t sub_id) const {
    // separate key-space walk so child streams never collide with draw blocks
    auto h = Philox4x64::block(key1_, sub_id, 0x5354524554434845ull, 0, key0_, ~key1_);
    return RngStream(key0_, h[0]);
}

}  // namespace stretchperc
