#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bulkdiff/coefficient.hpp"
#include "bulkdiff/configuration.hpp"
#include "bulkdiff/stats.hpp"

using namespace bulkdiff;

TEST_SUITE_BEGIN("config-core");

TEST_CASE("random stream is reproducible and splittable") {
    RandomStream a(42, 3), b(42, 3), c(42, 4);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    // distinct streams decorrelate
    RandomStream a2(42, 3);
    int agree = 0;
    for (int i = 0; i < 1000; ++i)
        if ((a2.next_u64() & 1u) == (c.next_u64() & 1u)) ++agree;
    CHECK(agree > 400);
    CHECK(agree < 600);

    RandomStream s(7);
    auto child1 = s.split(12), child1b = s.split(12);
    CHECK(child1.next_u64() == child1b.next_u64());
}

TEST_CASE("poisson sampler: mean equals variance equals rho |U|") {
    const Domain u = Domain::box(1, 3.0);
    RandomStream rng(101);
    RunningStats counts;
    for (int r = 0; r < 4000; ++r) {
        RandomStream rs = rng.split(r);
        counts.add(static_cast<double>(sample_poisson(u, 1.0, rs).size()));
    }
    CHECK(std::abs(counts.mean() - 3.0) < 3.0 * counts.std_error());
    // SE of the sample variance of Poisson(3): sqrt((mu4 - var^2)/R)
    const double se_var = std::sqrt((3.0 * (1 + 3 * 3.0) - 9.0) / 4000.0);
    CHECK(std::abs(counts.variance() - 3.0) < 3.0 * se_var);
}

TEST_CASE("poisson sampler: zero intensity and d=2 mean count") {
    RandomStream rng(5);
    CHECK(sample_poisson(Domain::cube(1, 2), 0.0, rng).empty());

    const Domain q1 = Domain::cube(2, 1); // area 9
    RunningStats counts;
    for (int r = 0; r < 2000; ++r) {
        RandomStream rs = rng.split(r);
        counts.add(static_cast<double>(sample_poisson(q1, 2.0, rs).size()));
    }
    CHECK(std::abs(counts.mean() - 18.0) < 3.0 * counts.std_error());
    CHECK_THROWS_AS(sample_poisson(q1, -1.0, rng), std::invalid_argument);
}

TEST_CASE("poisson sampler: chi-square goodness of fit at 1%") {
    RandomStream rng(2024);
    int idx = 0;
    for (double target : {1.0, 10.0, 100.0}) {
        const Domain u = Domain::box(1, target); // rho = 1
        std::vector<std::uint64_t> counts;
        for (int r = 0; r < 2000; ++r) {
            RandomStream rs = rng.split(1000 * ++idx + r);
            counts.push_back(sample_poisson(u, 1.0, rs).size());
        }
        const GofResult g = poisson_chi_square(counts, target);
        INFO("rho|U|=", target, " p=", g.p_value);
        CHECK(g.p_value >= 0.01);
    }
}

TEST_CASE("points land uniformly in the domain") {
    const Domain u = Domain::cube(2, 1);
    RandomStream rng(7);
    const Configuration mu = sample_poisson(u, 50.0, rng);
    int left = 0;
    for (const auto& p : mu.points()) {
        CHECK(u.contains(p));
        if (p[0] < 0.0) ++left;
    }
    const double n = static_cast<double>(mu.size());
    CHECK(std::abs(left - n / 2) < 3.0 * std::sqrt(n) / 2.0);
}

TEST_CASE("translate and restrict") {
    const Domain u = Domain::box(1, 6.0);
    Configuration mu(u);
    mu.add(vec1(1.0));
    const Configuration t = translate(mu, vec1(1.0));
    REQUIRE(t.size() == 1);
    CHECK(t.point(0)[0] == doctest::Approx(0.0));

    Configuration mu2(u);
    mu2.add(vec1(0.2));
    mu2.add(vec1(2.9));
    const Configuration r = translate_restrict_ball(mu2, Vec{}, 1.0);
    REQUIRE(r.size() == 1);
    CHECK(r.point(0)[0] == doctest::Approx(0.2));

    // group property: translate by x then -x
    RandomStream rng(3);
    const Configuration big = sample_poisson(u, 2.0, rng);
    const Configuration back = translate(translate(big, vec1(0.7)), vec1(-0.7));
    REQUIRE(back.size() == big.size());
    for (std::size_t i = 0; i < big.size(); ++i)
        CHECK(back.point(i)[0] == doctest::Approx(big.point(i)[0]).epsilon(1e-12));
}

TEST_CASE("torus translation wraps") {
    const Domain t = Domain::torus(1, 10.0);
    Configuration mu(t);
    mu.add(vec1(4.5));
    const Configuration shifted = translate(mu, vec1(-4.0)); // 4.5 + 4 wraps to -1.5
    REQUIRE(shifted.size() == 1);
    CHECK(shifted.point(0)[0] == doctest::Approx(-1.5));
}

TEST_CASE("count-indicator examples") {
    const CoefficientModel m(ModelKind::CountIndicator, 2.0);
    const Domain u = Domain::box(1, 6.0);
    Configuration mu(u);
    mu.add(vec1(0.0));
    CHECK(m.evaluate(mu, vec1(0.0))(0, 0) == doctest::Approx(1.0));
    mu.add(vec1(0.5));
    CHECK(m.evaluate(mu, vec1(0.0))(0, 0) == doctest::Approx(2.0));
    // the second point is outside B_1(0) at distance exactly 1? open ball
    Configuration mu2(u);
    mu2.add(vec1(0.0));
    mu2.add(vec1(1.0));
    CHECK(m.evaluate(mu2, vec1(0.0))(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("locality: coefficient depends on the unit ball only") {
    RandomStream rng(99);
    const Domain u = Domain::box(2, 8.0);
    const std::vector<CoefficientModel> catalog = {
        CoefficientModel(ModelKind::Identity, 1.0),
        CoefficientModel(ModelKind::CountIndicator, 2.0),
        CoefficientModel(ModelKind::SmoothCount, 3.0),
        CoefficientModel(ModelKind::AnisotropicCount, 2.5),
    };
    for (int trial = 0; trial < 50; ++trial) {
        RandomStream rs = rng.split(trial);
        Configuration mu = sample_poisson(u, 1.0, rs);
        const Vec x = vec2(rs.uniform(-1.0, 1.0), rs.uniform(-1.0, 1.0));
        for (const auto& model : catalog) {
            const SymMatrix before = model.evaluate(mu, x);
            Configuration far = mu;
            far.add(vec2(x[0] + 1.0, x[1]));      // on the closed ball boundary
            far.add(vec2(x[0] + 2.5, x[1] - 1.0)); // well outside
            const SymMatrix after = model.evaluate(far, x);
            for (int i = 0; i < 4; ++i)
                CHECK(before.a[static_cast<std::size_t>(i)] ==
                      doctest::Approx(after.a[static_cast<std::size_t>(i)]).epsilon(1e-14));
            // exact equality with the ball restriction
            const Configuration ball = translate_restrict_ball(mu, x, 1.0);
            const SymMatrix restricted = model.evaluate_at_origin(ball);
            for (int i = 0; i < 4; ++i)
                CHECK(before.a[static_cast<std::size_t>(i)] ==
                      restricted.a[static_cast<std::size_t>(i)]);
        }
    }
}

TEST_CASE("ellipticity audit over random models, configurations, directions") {
    RandomStream rng(17);
    for (int trial = 0; trial < 10000; ++trial) {
        RandomStream rs = rng.split(trial);
        const int d = 1 + static_cast<int>(rs.next_u64() % 2);
        const double lambda = 1.0 + 3.0 * rs.uniform();
        const int kind_pick = static_cast<int>(rs.next_u64() % 4);
        const CoefficientModel model(static_cast<ModelKind>(kind_pick), lambda,
                                     1 + static_cast<int>(rs.next_u64() % 3));
        const Domain u = Domain::box(d, 4.0);
        const Configuration mu = sample_poisson(u, 1.5, rs);
        Vec xi;
        double norm = 0.0;
        for (int k = 0; k < d; ++k) {
            xi[k] = rs.normal();
            norm += xi[k] * xi[k];
        }
        if (norm == 0.0) continue;
        for (int k = 0; k < d; ++k) xi[k] /= std::sqrt(norm);
        const Vec x = d == 1 ? vec1(rs.uniform(-1, 1)) : vec2(rs.uniform(-1, 1), rs.uniform(-1, 1));
        const SymMatrix a = model.evaluate(mu, x);
        const double q = a.quad(xi);
        CHECK(q >= 1.0 - 1e-12);
        CHECK(q <= lambda + 1e-12);
        CHECK(a.max_asymmetry() == 0.0);
    }
}

TEST_CASE("permutation invariance of coefficient evaluation") {
    RandomStream rng(31);
    const Domain u = Domain::box(1, 5.0);
    Configuration mu = sample_poisson(u, 2.0, rng);
    const CoefficientModel model(ModelKind::SmoothCount, 2.0);
    const SymMatrix a = model.evaluate(mu, vec1(0.3));
    auto pts = mu.points();
    std::reverse(pts.begin(), pts.end());
    const Configuration rev(u, pts);
    const SymMatrix b = model.evaluate(rev, vec1(0.3));
    CHECK(a(0, 0) == b(0, 0));
}

TEST_CASE("palm sampling") {
    RandomStream rng(55);
    const Domain u = Domain::box(1, 4.0);
    RandomStream r0 = rng.split(0);
    const Configuration only = sample_palm(u, 0.0, r0);
    REQUIRE(only.size() == 1);
    CHECK(only.point(0)[0] == 0.0);

    RunningStats counts;
    for (int r = 0; r < 3000; ++r) {
        RandomStream rs = rng.split(100 + r);
        counts.add(static_cast<double>(sample_palm(u, 1.0, rs).size()));
    }
    CHECK(std::abs(counts.mean() - 5.0) < 3.0 * counts.std_error());
}

TEST_CASE("palm flux of the count-indicator rule matches the void-probability value") {
    // E[p . a(mu + delta_0) p] = 1 + (lambda-1) (1 - exp(-rho |B_1|)), d=1
    const double lambda = 2.0, rho = 1.0;
    const CoefficientModel model(ModelKind::CountIndicator, lambda);
    const Domain window = Domain::box(1, 4.0); // covers B_1(0) with margin
    RandomStream rng(77);
    RunningStats flux;
    for (int r = 0; r < 20000; ++r) {
        RandomStream rs = rng.split(r);
        const Configuration mu = sample_palm(window, rho, rs);
        flux.add(model.evaluate(mu, Vec{})(0, 0));
    }
    const double expected = 1.0 + (lambda - 1.0) * (1.0 - std::exp(-2.0 * rho));
    CHECK(std::abs(flux.mean() - expected) < 3.0 * flux.std_error());
}

TEST_CASE("anisotropic rule produces direction-dependent diagonal entries") {
    const CoefficientModel model(ModelKind::AnisotropicCount, 2.0, 2);
    const Domain u = Domain::box(2, 6.0);
    Configuration mu(u);
    mu.add(vec2(0.0, 0.0));
    mu.add(vec2(0.5, 0.0)); // inside the e1 cone
    const SymMatrix a = model.evaluate(mu, vec2(0.0, 0.0));
    CHECK(a(0, 0) == doctest::Approx(2.0));
    CHECK(a(1, 1) == doctest::Approx(1.0));
    CHECK(a(0, 1) == 0.0);
}

TEST_CASE("model validation") {
    CHECK_THROWS_AS(CoefficientModel(ModelKind::CountIndicator, 0.5), std::invalid_argument);
    CHECK_NOTHROW(CoefficientModel::make_unchecked(ModelKind::CountIndicator, 0.5));
}

TEST_CASE("snapshot round trip") {
    RandomStream rng(404);
    const Domain t = Domain::torus(2, 9.0);
    const Configuration mu = sample_poisson(t, 0.8, rng);
    std::stringstream ss;
    write_snapshot(ss, mu, 1.25);
    std::optional<double> time;
    const Configuration back = read_snapshot(ss, &time);
    REQUIRE(back.size() == mu.size());
    REQUIRE(time.has_value());
    CHECK(*time == doctest::Approx(1.25));
    CHECK(back.domain().geometry() == Geometry::Torus);
    CHECK(back.domain().side() == doctest::Approx(9.0));
    for (std::size_t i = 0; i < mu.size(); ++i)
        for (int k = 0; k < 2; ++k)
            CHECK(back.point(i)[k] == doctest::Approx(mu.point(i)[k]).epsilon(1e-14));
}

TEST_CASE("mesoscopic grid tiles the cube") {
    const Domain q2 = Domain::cube(1, 2); // side 9
    const auto centers = mesoscopic_grid(q2, 1);
    REQUIRE(centers.size() == 3);
    CHECK(centers[0][0] == doctest::Approx(-3.0));
    CHECK(centers[2][0] == doctest::Approx(3.0));

    const Domain t = Domain::torus(2, 9.0);
    CHECK(mesoscopic_grid(t, 1).size() == 9);
    CHECK_THROWS_AS(mesoscopic_grid(Domain::torus(1, 10.0), 1), std::invalid_argument);
}

TEST_SUITE_END();
