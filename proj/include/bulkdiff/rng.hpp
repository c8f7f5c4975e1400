#pragma once

#include <cstdint>
#include <cmath>
#include <vector>

namespace bulkdiff {

/// Counter-based splittable random stream.
///
/// Each draw hashes (key, counter), so a stream is a pure function of
/// (seed, stream index, draw index): replicas can be re-generated out of
/// order and in parallel without shared state. split() derives a child
/// stream whose draws are statistically independent of the parent's.
class RandomStream {
public:
    RandomStream() : RandomStream(0, 0) {}
    RandomStream(std::uint64_t seed, std::uint64_t stream = 0) {
        key_ = mix(mix(seed ^ 0x9e3779b97f4a7c15ull) + 0xd1b54a32d192ed03ull * stream);
        ctr_ = 0;
    }

    RandomStream split(std::uint64_t child) const {
        RandomStream s;
        s.key_ = mix(key_ ^ mix(child + 0xbf58476d1ce4e5b9ull));
        s.ctr_ = 0;
        return s;
    }

    std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ull * ++ctr_); }

    /// Uniform in (0,1); never returns 0 or 1 exactly.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        // Marsaglia polar method
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double r = std::sqrt(-2.0 * std::log(s) / s);
        cached_ = v * r;
        have_cached_ = true;
        return u * r;
    }

    double exponential() { return -std::log(uniform()); }

    /// Poisson count with the given mean. Means above 16 are handled by
    /// additive splitting, so no large-mean approximation is involved.
    std::uint64_t poisson(double mean);

    /// Fisher-Yates permutation of {0,...,n-1}.
    std::vector<std::uint32_t> permutation(std::uint32_t n);

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_ = 0;
    std::uint64_t ctr_ = 0;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace bulkdiff
