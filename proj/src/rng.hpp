#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace mtlb {

// All randomness in the project flows through Rng so that runs are reproducible
// bit-for-bit. Streams are derived from a master seed plus a purpose tag; the
// same (seed, tag, indices) always yields the same stream, and disjoint tags
// give independent streams (so e.g. patient generation can be parallelized).
uint64_t splitmix64(uint64_t& state);
uint64_t mix_seed(uint64_t seed, const std::string& tag);
uint64_t mix_seed(uint64_t seed, const std::string& tag, uint64_t index);
uint64_t mix_seed(uint64_t seed, const std::string& tag, uint64_t a, uint64_t b);

class Rng {
   public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0,1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive bounds.
    int64_t uniform_int(int64_t lo, int64_t hi);

    // Box-Muller without cached state; consumes two uniforms per draw.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Weights need not be normalized.
    size_t categorical(const std::vector<double>& weights);

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

   private:
    std::mt19937_64 engine_;
};

}  // namespace mtlb
