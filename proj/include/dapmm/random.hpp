#pragma once

#include <cstdint>
#include <random>

namespace dapmm {

/// SplitMix64 finalizer; used to derive statistically independent seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of stream `index` under `master`. Each (master, index) pair names its own
/// stream, so a Monte-Carlo sample can be regenerated in isolation and in any order.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) noexcept
{
    return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t master, std::uint64_t index)
{
    return Rng{stream_seed(master, index)};
}

} // namespace dapmm
