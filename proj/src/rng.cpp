#include "bulkdiff/rng.hpp"

#include <stdexcept>

namespace bulkdiff {

std::uint64_t RandomStream::poisson(double mean) {
    if (mean < 0.0) throw std::invalid_argument("poisson: negative mean");
    if (mean == 0.0) return 0;
    std::uint64_t total = 0;
    // split so the multiplicative (Knuth) loop never underflows
    while (mean > 16.0) {
        const double half = mean * 0.5;
        total += poisson(half);
        mean -= half;
    }
    const double limit = std::exp(-mean);
    double prod = 1.0;
    std::uint64_t k = 0;
    for (;;) {
        prod *= uniform();
        if (prod <= limit) break;
        ++k;
    }
    return total + k;
}

std::vector<std::uint32_t> RandomStream::permutation(std::uint32_t n) {
    std::vector<std::uint32_t> p(n);
    for (std::uint32_t i = 0; i < n; ++i) p[i] = i;
    for (std::uint32_t i = n; i > 1; --i) {
        const std::uint32_t j = static_cast<std::uint32_t>(next_u64() % i);
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

} // namespace bulkdiff
