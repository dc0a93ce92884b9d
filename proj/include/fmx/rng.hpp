#pragma once

#include <cstdint>
#include <random>

namespace fmx {

/// One step of the SplitMix64 sequence. Used to derive independent
/// generator seeds from (experiment seed, stream id) pairs.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Well-known stream ids. Every consumer of randomness inside one seeded run
/// owns a distinct id so that streams never overlap.
namespace stream {
inline constexpr std::uint64_t kEnvironment = 1;
inline constexpr std::uint64_t kAgent = 2;
inline constexpr std::uint64_t kNetworkInit = 3;
inline constexpr std::uint64_t kSchedule = 4;
inline constexpr std::uint64_t kFallback = 5;
inline constexpr std::uint64_t kGuide = 6;
inline constexpr std::uint64_t kRndInit = 7;
inline constexpr std::uint64_t kMinibatch = 8;
inline constexpr std::uint64_t kInstance = 9;
}  // namespace stream

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id) noexcept {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream_id + 0x632BE59BD9B4E019ULL));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream_id) {
    return Rng{derive_seed(seed, stream_id)};
}

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace fmx
