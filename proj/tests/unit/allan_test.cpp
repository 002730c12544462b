#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>
#include <set>
#include <vector>

#include "avarkit/allan.hpp"
#include "avarkit/error.hpp"
#include "avarkit/noise_model.hpp"
#include "oracles.hpp"

using namespace avarkit;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected avarkit::Error");
    return ErrorCode::io_error;
}

SampleSeries white(std::size_t n, double sigma, std::uint64_t seed, double dt = 1.0) {
    SimSpec s;
    s.dt = dt;
    s.n_samples = n;
    s.seed = seed;
    s.params.n = sigma * std::sqrt(dt);
    s.enabled = {Process::white};
    return simulate_composite(s);
}

std::vector<double> random_series(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    const double offset = u(rng) * 100.0;
    const double slope = u(rng) * 1e-3;
    const double walk_scale = std::abs(u(rng)) * 0.1;
    std::vector<double> x(n);
    double walk = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        walk += walk_scale * g(rng);
        x[i] = offset + slope * static_cast<double>(i) + walk + g(rng);
    }
    return x;
}

}  // namespace

TEST_CASE("tiny series force tiny grids") {
    const TauGrid g9 = tau_grid_log(1.0, 9, 10);
    CHECK(g9.m_values == std::vector<std::size_t>{1, 2, 3, 4});
    CHECK(g9.taus == std::vector<double>{1, 2, 3, 4});
    const TauGrid g5 = tau_grid_log(1.0, 5, 10);
    CHECK(g5.m_values == std::vector<std::size_t>{1, 2});
    CHECK(code_of([] { tau_grid_log(1.0, 2, 10); }) == ErrorCode::series_too_short);
    CHECK(code_of([] { tau_grid_log(1.0, 100, 0); }) == ErrorCode::invalid_argument);
}

TEST_CASE("million-sample grid matches direct enumeration") {
    const std::size_t n = 1'000'000;
    const TauGrid g = tau_grid_log(0.01, n, 10);
    std::set<std::size_t> expected;
    for (int k = 0;; ++k) {
        const auto m = static_cast<std::size_t>(std::llround(std::pow(10.0, k / 10.0)));
        if (m > (n - 1) / 2) break;
        expected.insert(m);
    }
    CHECK(std::vector<std::size_t>(expected.begin(), expected.end()) == g.m_values);
    CHECK(g.size() >= 45);
    CHECK(g.size() <= 60);
    CHECK(g.taus.front() == 0.01);
    CHECK(g.taus.back() > 3000.0);
    CHECK(g.taus.back() <= 5000.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(g.taus[i] == static_cast<double>(g.m_values[i]) * 0.01);
        if (i > 0) CHECK(g.m_values[i] > g.m_values[i - 1]);
    }
}

TEST_CASE("explicit grids are validated") {
    CHECK(code_of([] { TauGrid::from_clusters({1, 5}, 1.0, 9); }) == ErrorCode::grid_mismatch);
    CHECK(code_of([] { TauGrid::from_clusters({2, 2}, 1.0, 9); }) == ErrorCode::grid_mismatch);
    CHECK(code_of([] { TauGrid::from_clusters({0}, 1.0, 9); }) == ErrorCode::grid_mismatch);
    CHECK(code_of([] { TauGrid::from_clusters({1}, 0.0, 9); }) == ErrorCode::invalid_argument);
    const SampleSeries s({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 1.0);
    const TauGrid other = tau_grid_log(1.0, 20, 10);
    CHECK(code_of([&] { avar_overlapping(s, other); }) == ErrorCode::grid_mismatch);
    CHECK(code_of([&] { avar_standard(s, other); }) == ErrorCode::grid_mismatch);
}

TEST_CASE("hand-evaluated AVAR of 1..6") {
    const SampleSeries s({1, 2, 3, 4, 5, 6}, 1.0);
    const TauGrid g = TauGrid::from_clusters({1, 2}, 1.0, 6);
    const AllanCurve st = avar_standard(s, g);
    CHECK(st.points[0].avar == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(st.points[1].avar == doctest::Approx(2.0).epsilon(1e-14));
    const AllanCurve ov = avar_overlapping(s, g);
    CHECK(ov.points[1].avar == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(ov.points[0].avar == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("constant series has zero AVAR everywhere") {
    const SampleSeries s(std::vector<double>(1000, 3.25), 0.1);
    const TauGrid g = tau_grid_log(0.1, 1000, 10);
    for (auto est : {Estimator::standard, Estimator::overlapping}) {
        for (const auto& p : compute_avar(s, g, est).points) {
            CHECK(p.avar == 0.0);
            CHECK(p.adev == 0.0);
        }
    }
}

TEST_CASE("estimators agree exactly on a linear ramp") {
    std::vector<double> ramp(5000);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 0.3 * static_cast<double>(i) - 7.0;
    const SampleSeries s(ramp, 0.5);
    const TauGrid g = tau_grid_log(0.5, ramp.size(), 10);
    const AllanCurve a = avar_standard(s, g);
    const AllanCurve b = avar_overlapping(s, g);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double tau = g.taus[i];
        CHECK(oracle::rel_diff(a.points[i].avar, b.points[i].avar) < 1e-12);
        // A ramp of rate r has AVAR r^2 tau^2 / 2 in units of sample index.
        const double r = 0.3 / 0.5;
        CHECK(oracle::rel_diff(b.points[i].avar, r * r * tau * tau / 2.0) < 1e-12);
    }
}

TEST_CASE("both estimators match the brute-force oracle") {
    std::mt19937_64 rng(20240611);
    for (int trial = 0; trial < 12; ++trial) {
        const std::size_t n = 9 + rng() % 3000;
        const auto x = random_series(rng, n);
        const SampleSeries s(x, 0.01);
        const TauGrid g = tau_grid_log(0.01, n, 10);
        const AllanCurve st = avar_standard(s, g);
        const AllanCurve ov = avar_overlapping(s, g);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const std::size_t m = g.m_values[i];
            CHECK(oracle::rel_diff(st.points[i].avar, oracle::avar_standard(x, m)) < 1e-12);
            CHECK(oracle::rel_diff(ov.points[i].avar, oracle::avar_overlapping(x, m)) < 1e-12);
        }
    }
}

TEST_CASE("adev is the square root of avar and grid metadata is carried") {
    const SampleSeries s = white(20'000, 1.0, 3);
    const TauGrid g = tau_grid_log(1.0, s.size(), 10);
    const AllanCurve c = avar_overlapping(s, g);
    CHECK(c.estimator == Estimator::overlapping);
    CHECK(c.source_len == s.size());
    CHECK(c.dt == 1.0);
    REQUIRE(c.points.size() == g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(c.points[i].adev == std::sqrt(c.points[i].avar));
        CHECK(c.points[i].tau == g.taus[i]);
        CHECK(c.points[i].m == g.m_values[i]);
        CHECK(c.points[i].avar >= 0.0);
    }
}

TEST_CASE("scaling and offset invariance") {
    const SampleSeries base = white(10'000, 1.0, 8);
    const TauGrid g = tau_grid_log(1.0, base.size(), 10);
    for (auto est : {Estimator::standard, Estimator::overlapping}) {
        const AllanCurve ref = compute_avar(base, g, est);
        for (double c : {-2.0, 3.7, 1e-4}) {
            std::vector<double> v(base.values().begin(), base.values().end());
            for (auto& x : v) x *= c;
            const AllanCurve scaled = compute_avar(SampleSeries(v, 1.0), g, est);
            for (std::size_t i = 0; i < g.size(); ++i) {
                CHECK(oracle::rel_diff(scaled.points[i].avar, c * c * ref.points[i].avar) < 1e-12);
                CHECK(oracle::rel_diff(scaled.points[i].adev, std::abs(c) * ref.points[i].adev) < 1e-12);
                if (c == -2.0) CHECK(scaled.points[i].avar == 4.0 * ref.points[i].avar);
            }
        }
        for (double offset : {1.0, -250.0, 1e6}) {
            std::vector<double> v(base.values().begin(), base.values().end());
            for (auto& x : v) x += offset;
            const AllanCurve shifted = compute_avar(SampleSeries(v, 1.0), g, est);
            // At 1e6 the shifted inputs themselves round at ~1e-10 absolute.
            const double tol = offset == 1e6 ? 1e-8 : 1e-12;
            for (std::size_t i = 0; i < g.size(); ++i) {
                CHECK(oracle::rel_diff(shifted.points[i].avar, ref.points[i].avar) < tol);
            }
        }
    }
}

TEST_CASE("estimators agree within confidence on white noise") {
    const SampleSeries s = white(200'000, 1.0, 21);
    const TauGrid g = tau_grid_log(1.0, s.size(), 10);
    const AllanCurve a = confidence_bounds(avar_standard(s, g));
    const AllanCurve b = confidence_bounds(avar_overlapping(s, g));
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!a.points[i].usable) continue;
        const double combined = std::hypot(a.points[i].rel_ci, b.points[i].rel_ci);
        CHECK(std::abs(a.points[i].adev / b.points[i].adev - 1.0) <= 3.0 * combined);
    }
}

TEST_CASE("white noise follows 1/sqrt(tau)") {
    const std::size_t n = 1'000'000;
    const SampleSeries s = white(n, 1.0, 5);
    const AllanCurve c = confidence_bounds(avar_overlapping(s, tau_grid_log(1.0, n, 10)));
    std::size_t in = 0, total = 0;
    for (const auto& p : c.points) {
        if (!p.usable) continue;
        ++total;
        in += std::abs(p.adev - 1.0 / std::sqrt(p.tau)) <= 3.0 * p.rel_ci / std::sqrt(p.tau);
    }
    CHECK(static_cast<double>(in) >= 0.95 * static_cast<double>(total));
}

TEST_CASE("confidence bound examples") {
    AllanCurve c;
    c.source_len = 1000;
    c.estimator = Estimator::standard;
    for (std::size_t m : {1u, 499u, 600u}) {
        AllanPoint p;
        p.m = m;
        p.tau = static_cast<double>(m);
        p.avar = 1.0;
        p.adev = 1.0;
        c.points.push_back(p);
    }
    const AllanCurve b = confidence_bounds(c);
    CHECK(b.points[0].rel_ci == doctest::Approx(1.0 / std::sqrt(2.0 * 999.0)).epsilon(1e-12));
    CHECK(b.points[0].rel_ci == doctest::Approx(0.02237).epsilon(1e-3));
    CHECK(b.points[1].rel_ci == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(b.points[1].usable);
    CHECK_FALSE(b.points[2].usable);
    CHECK(b.points[2].rel_ci == 1.0);
    CHECK(b.usable_count() == 2);

    AllanCurve twice = c;
    twice.source_len = 2000;
    const AllanCurve d = confidence_bounds(twice);
    CHECK(b.points[0].rel_ci / d.points[0].rel_ci == doctest::Approx(std::sqrt(2.0)).epsilon(0.01));
}

TEST_CASE("rel_ci falls as cluster count grows") {
    for (std::size_t m = 1; m < 400; ++m) {
        CHECK(independent_clusters(1000, m + 1) <= independent_clusters(1000, m));
    }
    const SampleSeries s = white(5000, 1.0, 2);
    const AllanCurve c = confidence_bounds(avar_overlapping(s, tau_grid_log(1.0, 5000, 10)));
    for (std::size_t i = 1; i < c.points.size(); ++i) CHECK(c.points[i].rel_ci >= c.points[i - 1].rel_ci);
    for (const auto& p : c.points) CHECK(p.rel_ci > 0.0);
}

TEST_CASE("results do not depend on the thread count") {
    const SampleSeries s = white(100'000, 2.0, 77);
    const TauGrid g = tau_grid_log(1.0, s.size(), 20);
    setenv("AVARKIT_THREADS", "1", 1);
    const AllanCurve one = avar_overlapping(s, g);
    setenv("AVARKIT_THREADS", "4", 1);
    const AllanCurve four = avar_overlapping(s, g);
    unsetenv("AVARKIT_THREADS");
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(one.points[i].avar == four.points[i].avar);
}

TEST_CASE("curve CSV and JSON round trip") {
    const SampleSeries s = white(3000, 1.0, 4, 0.01);
    const AllanCurve c = confidence_bounds(avar_overlapping(s, tau_grid_log(0.01, 3000, 10)));
    for (const AllanCurve& back : {curve_from_csv(curve_to_csv(c)), curve_from_json(curve_to_json(c))}) {
        REQUIRE(back.points.size() == c.points.size());
        for (std::size_t i = 0; i < c.points.size(); ++i) {
            CHECK(back.points[i].tau == c.points[i].tau);
            CHECK(back.points[i].avar == c.points[i].avar);
            CHECK(back.points[i].adev == c.points[i].adev);
            CHECK(back.points[i].rel_ci == c.points[i].rel_ci);
            CHECK(back.points[i].usable == c.points[i].usable);
        }
    }
    CHECK(curve_to_csv(c).rfind("tau,avar,adev,rel_ci\n", 0) == 0);
    CHECK(code_of([] { curve_from_csv("tau,avar,adev,rel_ci\n1,x,1,0.1\n"); }) == ErrorCode::parse_error);
    CHECK(code_of([] { curve_from_csv("tau,avar,adev,rel_ci\n"); }) == ErrorCode::empty_input);
    CHECK(code_of([] { curve_from_json("{"); }) == ErrorCode::parse_error);
}

TEST_CASE("estimator names") {
    CHECK(estimator_from_string("standard") == Estimator::standard);
    CHECK(estimator_from_string("overlapping") == Estimator::overlapping);
    CHECK(to_string(Estimator::overlapping) == "overlapping");
    CHECK(code_of([] { estimator_from_string("hadamard"); }) == ErrorCode::invalid_argument);
}
