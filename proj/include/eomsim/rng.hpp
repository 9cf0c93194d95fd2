#pragma once

#include <cstdint>
#include <limits>

namespace eomsim::rng {

/// Purposes a random stream can be drawn for. Every stochastic stage of a run
/// pulls from its own stream so that stages never share state.
enum class Stream : std::uint64_t {
    Generation = 1,
    Herald = 2,
    Chain = 3,
    AntiStokesDetection = 4,
    Trigger = 5,
    Test = 99,
};

constexpr std::uint64_t splitmix64(std::uint64_t &state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Mixes (seed, stream, index) into one 64-bit key. Shards use the shard
/// index so their streams are independent of how shards map to workers.
constexpr std::uint64_t derive_key(std::uint64_t seed, Stream stream, std::uint64_t index) noexcept {
    std::uint64_t s = seed;
    std::uint64_t k = splitmix64(s);
    s = k ^ (static_cast<std::uint64_t>(stream) * 0xD1B54A32D192ED03ULL);
    k = splitmix64(s);
    s = k ^ (index * 0xABC98388FB8FAC03ULL);
    return splitmix64(s);
}

/// xoshiro256** seeded through splitmix64; satisfies UniformRandomBitGenerator
/// so it plugs into the <random> distributions.
class Engine {
   public:
    using result_type = std::uint64_t;

    explicit Engine(std::uint64_t key) noexcept {
        std::uint64_t s = key;
        for (auto &word : state_) {
            word = splitmix64(s);
        }
    }

    Engine(std::uint64_t seed, Stream stream, std::uint64_t index) noexcept
        : Engine(derive_key(seed, stream, index)) {
    }

    static constexpr result_type min() noexcept {
        return 0;
    }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) noexcept {
        return uniform() < p;
    }

   private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4]{};
};

}  // namespace eomsim::rng
