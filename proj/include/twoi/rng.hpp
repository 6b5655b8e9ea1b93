// Copyright 2026 The twoi-sim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Counter-based random streams. Each trajectory (or pair) index owns an
// independent Philox4x32-10 stream keyed by the run seed, so results do not
// depend on the order in which indices are processed.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace twoi {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key)
{
    constexpr std::uint32_t kMulA = 0xD2511F53u;
    constexpr std::uint32_t kMulB = 0xCD9E8D57u;
    constexpr std::uint32_t kWeylA = 0x9E3779B9u;
    constexpr std::uint32_t kWeylB = 0xBB67AE85u;

    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t{kMulA} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{kMulB} * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeylA;
        key[1] += kWeylB;
    }
    return ctr;
}

/// Random stream for one work item: (seed, stream index) -> sequence.
class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream)
    {
    }

    std::uint64_t next_u64()
    {
        if (used_ >= 2) refill();
        const std::uint64_t out = (std::uint64_t{block_[2 * used_]} << 32) | block_[2 * used_ + 1];
        ++used_;
        return out;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform double in the open interval (0, 1).
    double uniform_open() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Uniform in (lo, hi); neither end point is ever returned.
    double uniform_open(double lo, double hi)
    {
        const double mid = 0.5 * (lo + hi);
        const double half = 0.5 * (hi - lo);
        const double x = mid + half * (2.0 * uniform_open() - 1.0);
        // Rounding can land on an end point when the interval is wide.
        if (x >= hi) return std::nextafter(hi, lo);
        if (x <= lo) return std::nextafter(lo, hi);
        return x;
    }

  private:
    void refill()
    {
        block_ = philox4x32({static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32),
                             static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32)},
                            key_);
        ++counter_;
        used_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int used_ = 2;
};

} // namespace twoi
