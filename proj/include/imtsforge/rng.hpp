#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

// Counter-based splitmix64 streams ("splitmix64-ctr-v1").
//
// The i-th output of a stream with key k is mix64(k + i * kGolden), which is
// exactly the splitmix64 sequence seeded with k, but addressable by counter.
// Streams are split by key derivation rather than by jumping, so any work
// item (grid point, dataset instance) owns an independent stream that is a
// pure function of (master seed, item index). This is what makes generated
// datasets reproducible byte-for-byte regardless of worker count.
namespace imts::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kDeriveSalt = 0xD6E8FEB86659FD93ULL;
inline constexpr const char* kAlgorithmId = "splitmix64-ctr-v1";

// splitmix64 output function (Steele/Lea/Flood finalizer)
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// child stream key for (key, tag); salted so derived keys never collide with
// the parent stream's own outputs
inline constexpr std::uint64_t derive_stream(std::uint64_t key, std::uint64_t tag) {
    return mix64((key ^ kDeriveSalt) + kGolden * (tag + 1));
}

class Stream {
public:
    explicit Stream(std::uint64_t key) : key_(key) {}

    std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGolden); }

    // uniform in [0, 1), 53 random bits
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [-1, 1)
    double next_symmetric() { return 2.0 * next_unit() - 1.0; }

    // standard normal via Box-Muller; always consumes exactly two draws
    double next_gaussian() {
        const double u1 = next_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(1.0 - u1));  // 1-u1 in (0,1]
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace imts::rng
