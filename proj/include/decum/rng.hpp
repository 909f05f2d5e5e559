#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace decum {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//
// A stream is fully determined by (seed, stream id, substream id): the seed is
// the key, and the stream/substream ids occupy three of the four counter words.
// The remaining word counts blocks inside the substream. Any (path, date) pair
// can therefore be drawn independently and in any order, which keeps Monte
// Carlo output identical regardless of how paths are split over workers.
class RandomStream {
public:
    using result_type = std::uint64_t;

    RandomStream(std::uint64_t seed, std::uint64_t stream, std::uint32_t substream = 0) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          ctr_{0u, substream, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        if (used_ >= 4) refill();
        const std::uint64_t lo = block_[used_++];
        const std::uint64_t hi = block_[used_++];
        return (hi << 32) | lo;
    }

    // Uniform in (0, 1), never exactly zero.
    double uniform() noexcept { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    // The raw bijection: ten rounds on one counter block.
    static Counter block(Counter c, Key k) noexcept {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
            c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
                 static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
            k[0] += kWeyl0;
            k[1] += kWeyl1;
        }
        return c;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    void refill() noexcept {
        block_ = block(ctr_, key_);
        used_ = 0;
        ++ctr_[0];
    }

    Key key_;
    Counter ctr_;
    Counter block_{};
    int used_ = 4;
};

}  // namespace decum
