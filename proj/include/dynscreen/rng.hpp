#pragma once

#include <cstdint>
#include <random>

namespace dynscreen {

using Rng = std::mt19937_64;

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Counter-based split: the stream for (stream, index) depends only on the
/// three inputs, never on evaluation order.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                                  std::uint64_t index) noexcept {
    std::uint64_t s = master;
    std::uint64_t a = splitmix64(s);
    s = a ^ stream;
    std::uint64_t b = splitmix64(s);
    s = b ^ index;
    return splitmix64(s);
}

[[nodiscard]] inline Rng make_stream(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
    return Rng(derive_seed(master, stream, index));
}

/// Uniform double in [0, 1) from the top 53 bits.
[[nodiscard]] inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1p-53; }

}  // namespace dynscreen
