#include <doctest.h>

#include <cmath>
#include <numbers>

#include "spiny/noise.hpp"

using namespace spiny;

TEST_CASE("derived streams are reproducible and distinct") {
    Rng a = make_stream(7, 3, 1), b = make_stream(7, 3, 1), c = make_stream(7, 4, 1), d = make_stream(7, 3, 2);
    const double x = a.normal();
    CHECK(x == b.normal());
    CHECK(x != c.normal());
    CHECK(x != d.normal());
    CHECK(a.draws() == 1);
}

TEST_CASE("ou_step") {
    Rng rng(1);
    SUBCASE("deterministic decay") {
        const auto s = ou_step({1.0, 1.0, 0.0, 0.0}, 0.1, rng);
        CHECK(s.K == doctest::Approx(0.9));
    }
    SUBCASE("theta is a fixed point without noise") {
        for (double dt : {0.001, 0.1, 0.7}) CHECK(ou_step({0.3, 2.0, 0.3, 0.0}, dt, rng).K == 0.3);
    }
    SUBCASE("beta = sigma = 1: unit autocorrelation time") {
        // Lag-tau autocorrelation of the stationary process is exp(-beta tau).
        const double dt = 0.01;
        OUState s{0.0, 1.0, 0.0, 1.0};
        const int n = 400000, lag = 100;
        std::vector<double> k(n);
        for (int i = 0; i < 2000; ++i) s = ou_step(s, dt, rng);
        for (auto& v : k) v = (s = ou_step(s, dt, rng)).K;
        double c0 = 0.0, c1 = 0.0;
        for (int i = 0; i + lag < n; ++i) {
            c0 += k[i] * k[i];
            c1 += k[i] * k[i + lag];
        }
        CHECK(c1 / c0 == doctest::Approx(std::exp(-1.0)).epsilon(0.1));
    }
}

TEST_CASE("lambda_j") {
    CHECK(lambda_j(0, 2.4, 64.8) == 1.0);
    CHECK(lambda_j(1, 64.8, 64.8) == doctest::Approx(std::exp(-std::numbers::pi / 2.0)));
    CHECK(lambda_j(1, 64.8, 64.8) == doctest::Approx(0.20788).epsilon(1e-4));
    for (int j : {1, 10, 100}) CHECK(lambda_j(j, 1e-9, 64.8) == doctest::Approx(1.0));
    for (int j = 1; j < 50; ++j) CHECK(lambda_j(j, 1.0, 30.0) < lambda_j(j - 1, 1.0, 30.0));
}

TEST_CASE("correlation_fn") {
    CHECK(correlation_fn(0.0, 0.5) == doctest::Approx(1.0));
    CHECK(correlation_fn(100.0, 0.5) < 1e-300);
    CHECK(correlation_fn(0.3, 1.0) == correlation_fn(-0.3, 1.0));
    // Trapezoidal quadrature against the closed-form integral 1.
    for (double zeta : {0.4, 1.0, 2.4}) {
        const double h = 1e-3 * zeta;
        double s = 0.0;
        for (double x = -12.0 * zeta; x <= 12.0 * zeta; x += h) s += correlation_fn(x, zeta) * h;
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("default_truncation is the smallest J below 1e-8") {
    for (double zeta : {0.08, 0.4, 2.4, 10.0}) {
        const int J = default_truncation(zeta, 64.8);
        CHECK(lambda_j(J, zeta, 64.8) < 1e-8);
        CHECK(lambda_j(J - 1, zeta, 64.8) >= 1e-8);
    }
}

TEST_CASE("QWiener") {
    SUBCASE("flat mode only is spatially constant") {
        // J = 0 selects the default truncation, so suppress the j >= 1 modes
        // with a huge zeta instead.
        QWiener flat({1.0, 5.0, 20.0}, 1e6, 30.0, 1);
        Rng rng(5);
        std::vector<double> out(3);
        flat.increment(0.01, rng, out);
        CHECK(out[0] == doctest::Approx(out[1]));
        CHECK(out[1] == doctest::Approx(out[2]));
        CHECK(out[0] == doctest::Approx(std::sqrt(1.0 / 30.0) * flat.brownians()[0]));
        CHECK(QWiener({1.0}, 1.0, 30.0, 0).truncation() == default_truncation(1.0, 30.0));
    }
    SUBCASE("pointwise variance rate equals F_c(0) in the interior") {
        std::vector<double> x{10.0, 15.0, 20.0};
        QWiener qw(x, 1.0, 30.0, 0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(qw.pointwise_variance_rate(i) == doctest::Approx(correlation_fn(0.0, 1.0)).epsilon(1e-6));
        }
        CHECK(qw.eigenvalue(3) == doctest::Approx(lambda_j(3, 1.0, 30.0) * lambda_j(3, 1.0, 30.0)));
    }
    SUBCASE("mode expansion reproduces F_c between interior points") {
        std::vector<double> x{12.0, 12.5, 13.0, 14.0, 15.0};
        QWiener qw(x, 1.0, 30.0, 0);
        for (std::size_t i = 1; i < x.size(); ++i) {
            double k = 0.0;
            for (int j = 0; j <= qw.truncation(); ++j) k += qw.eigenvalue(j) * qw.mode(j, 0) * qw.mode(j, i);
            CHECK(k == doctest::Approx(correlation_fn(x[i] - x[0], 1.0)).epsilon(1e-6));
        }
    }
    SUBCASE("Monte-Carlo variance and covariance") {
        std::vector<double> x{13.0, 14.0, 15.0, 16.0};
        const double zeta = 1.0, dt = 0.01;
        QWiener qw(x, zeta, 30.0, 0);
        Rng rng(11);
        const std::size_t N = 20000;
        std::vector<std::vector<double>> rows(N, std::vector<double>(x.size()));
        for (auto& r : rows) qw.increment(dt, rng, r);
        const auto cov = estimate_covariance(rows);
        const double F0 = correlation_fn(0.0, zeta);
        for (std::size_t i = 0; i < x.size(); ++i) {
            for (std::size_t k = 0; k < x.size(); ++k) {
                const double F = correlation_fn(x[i] - x[k], zeta);
                const double se = dt * std::sqrt((F0 * F0 + F * F) / N);
                CHECK(std::abs(cov[i * x.size() + k] - F * dt) < 4.0 * se);
            }
        }
    }
}

TEST_CASE("white_increment") {
    Rng rng(3);
    CHECK(white_increment(0, 0.1, rng).empty());
    const auto shared = white_increment(5, 0.1, rng, true);
    for (double v : shared) CHECK(v == shared[0]);

    const double dx = 0.25;
    const std::size_t N = 40000;
    std::vector<double> s2(3, 0.0);
    for (std::size_t k = 0; k < N; ++k) {
        const auto w = white_increment(3, 1.0, rng, false, 1.0 / std::sqrt(dx));
        for (std::size_t i = 0; i < 3; ++i) s2[i] += w[i] * w[i];
    }
    for (double s : s2) CHECK(std::abs(s / N - 1.0 / dx) < 4.0 * (1.0 / dx) * std::sqrt(2.0 / N));
}

TEST_CASE("estimate_covariance") {
    CHECK_THROWS_AS(estimate_covariance({{1.0, 2.0}}), InsufficientDataError);
    CHECK_THROWS_AS(estimate_covariance({{1.0, 2.0}, {1.0}}), std::invalid_argument);

    const auto zero = estimate_covariance({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}});
    for (double v : zero) CHECK(v == 0.0);

    // Independent white samples: near-diagonal.
    Rng rng(9);
    const std::size_t N = 20000;
    std::vector<std::vector<double>> rows(N);
    for (auto& r : rows) r = white_increment(4, 1.0, rng);
    const auto cov = estimate_covariance(rows);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t k = 0; k < 4; ++k) {
            const double target = i == k ? 1.0 : 0.0;
            const double se = i == k ? std::sqrt(2.0 / N) : std::sqrt(1.0 / N);
            CHECK(std::abs(cov[i * 4 + k] - target) < 4.0 * se);
        }
    }
    // Symmetric.
    CHECK(cov[1] == cov[4]);
}

TEST_CASE("q-Wiener samples at zeta = 3 d_spacing decay like F_c") {
    const double d = 0.8, zeta = 3.0 * d, L = 64.8, dt = 0.02;
    std::vector<double> x;
    for (int i = 0; i < 8; ++i) x.push_back(L / 2.0 + i * d);
    QWiener qw(x, zeta, L, 0);
    Rng rng(21);
    const std::size_t N = 20000;
    std::vector<std::vector<double>> rows(N, std::vector<double>(x.size()));
    for (auto& r : rows) qw.increment(dt, rng, r);
    const auto cov = estimate_covariance(rows);
    const double F0 = correlation_fn(0.0, zeta);
    for (std::size_t k = 1; k < x.size(); ++k) {
        const double F = correlation_fn(x[k] - x[0], zeta);
        CHECK(std::abs(cov[k] - F * dt) < 3.0 * dt * std::sqrt((F0 * F0 + F * F) / N));
    }
}

TEST_CASE("NoiseSource OU kind forces with K dt and starts stationary") {
    NoiseConfig nc;
    nc.kind = NoiseKind::ou_temporal;
    nc.beta = 2.0;
    nc.sigma = 1.0;
    const std::size_t n = 20000;
    NoiseSource src(nc, std::vector<double>(n, 0.0), 10.0, 0.0, Rng(4));
    std::vector<double> out(n);
    const double dt = 0.01;
    src.next(dt, out);
    double s2 = 0.0;
    for (double v : out) s2 += (v / dt) * (v / dt);
    const double var = 1.0 / (2.0 * 2.0);
    CHECK(std::abs(s2 / n - var) < 4.0 * var * std::sqrt(2.0 / n));
}
