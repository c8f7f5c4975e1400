#include "bulkdiff/geometry.hpp"

namespace bulkdiff {

std::vector<Vec> mesoscopic_grid(const Domain& dom, int n) {
    if (n < 0) throw std::invalid_argument("mesoscopic_grid: n must be >= 0");
    const double cell = std::pow(3.0, n);
    const double ratio = dom.side() / cell;
    const long count = std::lround(ratio);
    if (count < 1 || std::abs(ratio - static_cast<double>(count)) > 1e-9)
        throw std::invalid_argument("mesoscopic_grid: domain side is not a multiple of 3^n");

    // cell centers: symmetric about the domain center
    std::vector<double> axis(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i)
        axis[static_cast<std::size_t>(i)] =
            (static_cast<double>(i) - static_cast<double>(count - 1) / 2.0) * cell;

    std::vector<Vec> centers;
    if (dom.dimension() == 1) {
        for (double x : axis) centers.push_back(vec1(dom.center()[0] + x));
    } else {
        for (double y : axis)
            for (double x : axis)
                centers.push_back(vec2(dom.center()[0] + x, dom.center()[1] + y));
    }
    return centers;
}

} // namespace bulkdiff
