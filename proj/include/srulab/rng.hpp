#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace srulab {

/// Counter-based SplitMix64 generator.
///
/// The i-th output of a stream with key k is mix(k + (i + 1) * 0x9E3779B97F4A7C15),
/// where mix is the SplitMix64 finalizer. Child streams are keyed by mixing the
/// parent key with a stream id (or the FNV-1a hash of a stream name), so every
/// named consumer of randomness (data, init, dropout, search, ...) draws from an
/// independent, platform-stable sequence. Normal deviates use Box-Muller.
class Rng {
public:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

    explicit Rng(std::uint64_t key = 0) : key_(key) {}

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static constexpr std::uint64_t hash_name(std::string_view name) {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001B3ULL;
        }
        return h;
    }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

    /// Value at an absolute position; does not advance the stream.
    std::uint64_t at(std::uint64_t index) const { return mix(key_ + (index + 1) * kGamma); }

    std::uint64_t next_u64() { return at(counter_++); }

    Rng stream(std::uint64_t id) const { return Rng(mix(key_ ^ mix(id + kGamma))); }
    Rng stream(std::string_view name) const { return stream(hash_name(name)); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] (inclusive).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<double>(hi - lo + 1);
        auto v = lo + static_cast<std::int64_t>(std::floor(uniform() * span));
        return v > hi ? hi : v;
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        // 1 - u keeps the log argument in (0, 1].
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace srulab
