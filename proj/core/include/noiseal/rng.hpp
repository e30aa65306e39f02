#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace noiseal {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent child seed from a root seed and a stream tag, so every
// module draws from its own stream without sharing generator state.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                                    std::initializer_list<std::uint64_t> salt = {}) noexcept {
    std::uint64_t h = mix64(root);
    for (char c : tag) h = mix64(h ^ static_cast<unsigned char>(c));
    for (std::uint64_t s : salt) h = mix64(h ^ s);
    return h;
}

inline Rng make_rng(std::uint64_t root, std::string_view tag,
                    std::initializer_list<std::uint64_t> salt = {}) {
    return Rng(derive_seed(root, tag, salt));
}

// Uniform double in [0, 1) built from the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) by rejection; avoids implementation-defined distributions.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % n;
}

}  // namespace noiseal
