#include "rng.hpp"

#include "common.hpp"

namespace mtlb {

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t mix_seed(uint64_t seed, const std::string& tag) {
    uint64_t s = seed ^ fnv1a64(tag);
    return splitmix64(s);
}

uint64_t mix_seed(uint64_t seed, const std::string& tag, uint64_t index) {
    uint64_t s = mix_seed(seed, tag) ^ (index * 0xd1342543de82ef95ULL + 1);
    return splitmix64(s);
}

uint64_t mix_seed(uint64_t seed, const std::string& tag, uint64_t a, uint64_t b) {
    uint64_t s = mix_seed(seed, tag, a) ^ (b * 0x2545f4914f6cdd1dULL + 1);
    return splitmix64(s);
}

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
    if (hi < lo) throw UsageError("uniform_int: hi < lo");
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<int64_t>(engine_());  // full 64-bit range
    // Rejection sampling for an unbiased draw.
    uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t r;
    do {
        r = engine_();
    } while (r >= limit);
    return lo + static_cast<int64_t>(r % span);
}

size_t Rng::categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0) throw UsageError("categorical: nonpositive total weight");
    double u = uniform() * total;
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return i;
    }
    return weights.size() - 1;
}

}  // namespace mtlb
