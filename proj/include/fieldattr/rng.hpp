#pragma once

// Counter-based RNG: Philox4x32-10 (Salmon et al., "Parallel random numbers:
// as easy as 1, 2, 3"). Chosen because every stochastic step in the protocol
// must be reproducible from (seed, stream name, draw index) alone, and
// substreams must be cheap to mint without coordination. Each generator owns
// a 64-bit key-derived state; the 128-bit counter is split into a 64-bit
// block index and a 64-bit stream id.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace fieldattr {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_name(std::string_view name) {
    // FNV-1a then a splitmix finalize; used to turn stream names into ids.
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    std::uint64_t s = h;
    return splitmix64(s);
}

// Deterministic seed for the i-th sub-task of a named phase; used wherever a
// run fans out into independently seeded fits or paths.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view phase, std::uint64_t i) {
    std::uint64_t s = seed ^ hash_name(phase);
    s ^= 0xA0761D6478BD642FULL * (i + 1);
    return splitmix64(s);
}

class Philox {
public:
    Philox() : Philox(0, 0) {}

    Philox(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t s = seed;
        std::uint64_t k = splitmix64(s);
        key_[0] = static_cast<std::uint32_t>(k);
        key_[1] = static_cast<std::uint32_t>(k >> 32);
        stream_ = stream;
        block_ = 0;
        avail_ = 0;
        have_cached_normal_ = false;
        cached_normal_ = 0.0;
    }

    // Independent generator for a named sub-task of this one. Derivation
    // hashes (stream, index) so nested substreams do not collide in practice.
    Philox substream(std::uint64_t index) const {
        std::uint64_t s = stream_ ^ (0xA0761D6478BD642FULL * (index + 1));
        std::uint64_t sid = splitmix64(s);
        Philox out;
        out.key_ = key_;
        out.stream_ = sid;
        return out;
    }

    Philox substream(std::string_view name) const { return substream(hash_name(name)); }

    std::uint64_t next_u64() {
        if (avail_ == 0) refill();
        --avail_;
        return buffer_[avail_];
    }

    // Strictly inside (0,1): representable as (k + 0.5) * 2^-53.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (have_cached_normal_) {
            have_cached_normal_ = false;
            return cached_normal_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        cached_normal_ = r * std::sin(a);
        have_cached_normal_ = true;
        return r * std::cos(a);
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;

    static void round(std::array<std::uint32_t, 4>& c, std::uint32_t k0, std::uint32_t k1) {
        std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
        std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
        std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
    }

    void refill() {
        std::array<std::uint32_t, 4> c = {
            static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
            static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
        std::uint32_t k0 = key_[0], k1 = key_[1];
        for (int r = 0; r < 10; ++r) {
            round(c, k0, k1);
            k0 += kW0;
            k1 += kW1;
        }
        buffer_[0] = (static_cast<std::uint64_t>(c[1]) << 32) | c[0];
        buffer_[1] = (static_cast<std::uint64_t>(c[3]) << 32) | c[2];
        avail_ = 2;
        ++block_;
    }

    std::array<std::uint32_t, 2> key_{};
    std::uint64_t stream_ = 0;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int avail_ = 0;
    bool have_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

}  // namespace fieldattr
