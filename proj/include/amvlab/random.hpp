#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace amv {

/// Master seed plus stream id. Distinct streams never share counters.
struct SeedSpec {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// The output block is a pure function of (key, counter).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter block(Counter ctr, Key key) noexcept
    {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
                   static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
                   static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

inline std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Sequential view of one Philox stream: key = mix(seed, stream), counter = (index, substream).
/// Any (stream, substream) pair can be opened independently, so work split into fixed
/// chunks draws the same numbers regardless of which thread runs a chunk.
class CounterRng {
public:
    CounterRng(SeedSpec spec, std::uint64_t substream = 0) noexcept
        : substream_(substream)
    {
        const std::uint64_t k = splitmix64(spec.seed ^ splitmix64(spec.stream + 0x632BE59BD9B4E019ull));
        key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    }

    std::uint32_t next_u32() noexcept
    {
        if (pos_ == 4) refill();
        return buf_[pos_++];
    }

    std::uint64_t next_u64() noexcept
    {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (cached pair).
    double normal() noexcept
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double rad = std::sqrt(-2.0 * std::log(u1));
        spare_ = rad * std::sin(2.0 * std::numbers::pi * u2);
        has_spare_ = true;
        return rad * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    void refill() noexcept
    {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(index_), static_cast<std::uint32_t>(index_ >> 32),
                                      static_cast<std::uint32_t>(substream_), static_cast<std::uint32_t>(substream_ >> 32)};
        buf_ = Philox4x32::block(ctr, key_);
        ++index_;
        pos_ = 0;
    }

    Philox4x32::Key key_{};
    std::uint64_t substream_;
    std::uint64_t index_ = 0;
    Philox4x32::Counter buf_{};
    int pos_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace amv
