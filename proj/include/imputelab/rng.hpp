#pragma once

// Counter-based random streams.
//
// Every random quantity in the library is drawn from a StreamRng keyed by a
// master seed plus a short path of integers (stream tag, record index,
// imputation index, ...).  The k-th output of a stream is a pure function of
// (key, k), so results never depend on iteration order or thread count.
//
//   key    = fold(seed, path)          fold(h, id) = mix64(h ^ mix64(id + C))
//   out[k] = mix64(key + (k + 1) * G)  G = 0x9E3779B97F4A7C15
//
// mix64 is the SplitMix64 finalizer.

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace imputelab {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t h = mix64(seed ^ 0x6A09E667F3BCC909ULL);
    for (std::uint64_t id : path) {
        h = mix64(h ^ mix64(id + 0x3C6EF372FE94F82BULL));
    }
    return h;
}

// Stream tags; one per consumer so streams never collide across subsystems.
enum class StreamTag : std::uint64_t {
    sample = 1,
    impute = 2,
    scan = 3,
    hla_pairs = 4,
    hla_impute = 5,
    hla_experiment = 6,
};

class StreamRng {
   public:
    using result_type = std::uint64_t;

    explicit StreamRng(std::uint64_t key) noexcept : key_(key) {}

    StreamRng(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept
        : key_(derive_key(seed, path)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        counter_ += 0x9E3779B97F4A7C15ULL;
        return mix64(key_ + counter_);
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    // Uniform on {0, ..., n-1}; Lemire's multiply-shift with rejection, so unbiased.
    std::uint64_t uniform_index(std::uint64_t n) noexcept {
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>((*this)()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool bernoulli(double p) noexcept { return uniform01() < p; }

   private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

inline StreamRng make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0, std::uint64_t b = 0,
                             std::uint64_t c = 0) noexcept {
    return StreamRng(seed, {static_cast<std::uint64_t>(tag), a, b, c});
}

}  // namespace imputelab
