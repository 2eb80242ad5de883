#pragma once

// Counter-based random numbers. Philox4x32-10 (Salmon et al., SC'11) drives
// every stochastic consumer: environment sites, particle jumps and replica
// streams are all addressed by a 64-bit key plus a counter, so any draw can be
// regenerated from its coordinates alone.

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace rwre {

using Philox4x32Ctr = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

Philox4x32Ctr philox4x32_10(Philox4x32Ctr ctr, Philox4x32Key key);

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
    return splitmix64(h ^ splitmix64(v + 0x632be59bd9b4e019ULL));
}

inline constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed discipline: every stochastic consumer derives its key from
/// (master seed, purpose tag, replica index).
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) {
    return hash_combine(hash_combine(splitmix64(master), fnv1a(tag)), index);
}

/// Philox stream over a fixed key. Satisfies UniformRandomBitGenerator with
/// 64-bit output; each Philox block yields two outputs.
class CounterRng {
  public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t key, std::uint64_t stream = 0)
        : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
          stream_(stream) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (avail_ == 0) refill();
        const int i = 2 - avail_--;
        return (static_cast<std::uint64_t>(block_[2 * i + 1]) << 32) | block_[2 * i];
    }

    /// Uniform double in the open interval (0, 1).
    double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    std::uint64_t blocks_used() const { return counter_; }

  private:
    void refill() {
        const Philox4x32Ctr ctr{static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                                static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
        block_ = philox4x32_10(ctr, key_);
        ++counter_;
        avail_ = 2;
    }

    Philox4x32Key key_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    Philox4x32Ctr block_{};
    int avail_ = 0;
};

}  // namespace rwre
