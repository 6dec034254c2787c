#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace fedvi {

// Splittable 64-bit random stream (splitmix64). Every draw is a pure function
// of the seed, so any run replays exactly; split() derives decorrelated
// streams for distinct ids without advancing the parent.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    static Rng split(std::uint64_t seed, std::uint64_t stream) {
        return Rng(mix(seed, stream));
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform on [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Standard exponential; finite because next_double() < 1.
    double next_exponential() {
        return -std::log1p(-next_double());
    }

    // Inverse-CDF draw over an (approximately) normalized row. Consumes
    // exactly one uniform. Falls back to the last index if rounding makes
    // the cumulative sum fall short of u.
    int next_categorical(std::span<const double> probs) {
        const double u = next_double();
        double acc = 0.0;
        for (std::size_t k = 0; k < probs.size(); ++k) {
            acc += probs[k];
            if (u < acc) return static_cast<int>(k);
        }
        return static_cast<int>(probs.size()) - 1;
    }

    // Bernoulli(p) consuming one uniform.
    bool next_bernoulli(double p) { return next_double() < p; }

private:
    // Two finalizer rounds decorrelate adjacent stream ids.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        z ^= z >> 31;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

}  // namespace fedvi
