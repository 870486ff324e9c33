#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "nfbeam/specfun.hpp"
#include "oracles.hpp"

using namespace nfbeam;
using Catch::Approx;

TEST_CASE("erf_complex basics", "[specfun]") {
    CHECK(specfun::erf_complex({0.0, 0.0}) == cdouble(0.0, 0.0));
    // Frozen from the real-axis series oracle.
    CHECK(specfun::erf_complex({1.0, 0.0}).real() == Approx(0.84270079294971).epsilon(1e-12));
    CHECK(specfun::erf_complex({1.0, 0.0}).imag() == 0.0);
    CHECK_THROWS_AS(specfun::erf_complex({std::nan(""), 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(
        specfun::erf_complex({0.0, std::numeric_limits<double>::infinity()}),
        std::invalid_argument);
}

TEST_CASE("erf_complex matches the real-axis series oracle", "[specfun]") {
    for (double x = -6.0; x <= 6.0; x += 0.125) {
        const double ref = oracles::erf_real_series(x);
        const cdouble got = specfun::erf_complex({x, 0.0});
        CHECK(got.imag() == 0.0);
        if (std::fabs(ref) > 0.0)
            CHECK(std::fabs(got.real() - ref) / std::fabs(ref) < 1e-10);
    }
}

TEST_CASE("erf_complex matches quadrature along the e^{j3pi/4} ray", "[specfun]") {
    // Covers all three evaluation branches (series, bridge ring, asymptotic).
    for (double t : {0.5, 1.0, 2.0, 4.0, 4.5, 5.0, 5.7, 6.5, 8.0, 12.0, 25.0, 40.0}) {
        const cdouble z = kRay34 * t;
        const cdouble ref = oracles::erf_quadrature(z);
        const cdouble got = specfun::erf_complex(z);
        CHECK(std::abs(got - ref) / std::abs(ref) < 1e-10);
    }
}

TEST_CASE("erf_complex off-ray spot checks against quadrature", "[specfun]") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> mag(0.1, 12.0), ang(0.0, 2.0 * kPi);
    for (int i = 0; i < 60; ++i) {
        const cdouble z = std::polar(mag(rng), ang(rng));
        const cdouble ref = oracles::erf_quadrature(z);
        const cdouble got = specfun::erf_complex(z);
        CHECK(std::abs(got - ref) / std::abs(ref) < 1e-10);
    }
}

TEST_CASE("erf_complex symmetries are exact", "[specfun]") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> mag(0.0, 6.0), ang(0.0, 2.0 * kPi);
    for (int i = 0; i < 1000; ++i) {
        const cdouble z = std::polar(mag(rng), ang(rng));
        const cdouble w = specfun::erf_complex(z);
        CHECK(std::abs(specfun::erf_complex(-z) + w) <= 1e-12 * std::max(1.0, std::abs(w)));
        CHECK(std::abs(specfun::erf_complex(std::conj(z)) - std::conj(w)) <=
              1e-12 * std::max(1.0, std::abs(w)));
    }
}

TEST_CASE("erf_complex saturates without overflow for large real parts", "[specfun]") {
    const cdouble w = specfun::erf_complex({12.0, 0.3});
    CHECK(std::isfinite(w.real()));
    CHECK(std::abs(w - cdouble(1.0, 0.0)) < 1e-20);
    const cdouble wn = specfun::erf_complex({-12.0, 0.3});
    CHECK(std::abs(wn + cdouble(1.0, 0.0)) < 1e-20);
}

TEST_CASE("bessel I0/I1 values", "[specfun]") {
    CHECK(specfun::bessel_i0(0.0) == 1.0);
    CHECK(specfun::bessel_i1(0.0) == 0.0);
    // Frozen from the integral-representation oracle.
    CHECK(specfun::bessel_i0(1.0) == Approx(1.26606587775201).epsilon(1e-12));
    CHECK(specfun::i1_over_i0(2.0) == Approx(0.69777465796401).epsilon(1e-10));
    CHECK_THROWS_AS(specfun::bessel_i0(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(specfun::bessel_i1(std::nan("")), std::invalid_argument);
}

TEST_CASE("bessel series region matches the integral oracle", "[specfun]") {
    for (double x = 0.25; x <= 20.0; x += 0.75) {
        CHECK(specfun::bessel_i0(x) ==
              Approx(oracles::bessel_i_integral(0, x)).epsilon(1e-12));
        CHECK(specfun::bessel_i1(x) ==
              Approx(oracles::bessel_i_integral(1, x)).epsilon(1e-12));
    }
}

TEST_CASE("scaled bessel variants avoid overflow", "[specfun]") {
    CHECK(std::isfinite(specfun::bessel_i0_scaled(1000.0)));
    CHECK(std::isfinite(specfun::bessel_i1_scaled(1000.0)));
    // Continuity across the series/asymptotic switch at x = 20.
    CHECK(specfun::bessel_i0_scaled(20.0 - 1e-9) ==
          Approx(specfun::bessel_i0_scaled(20.0 + 1e-9)).epsilon(1e-10));
    CHECK(specfun::bessel_i1_scaled(20.0 - 1e-9) ==
          Approx(specfun::bessel_i1_scaled(20.0 + 1e-9)).epsilon(1e-10));
}

TEST_CASE("log_i0 stays finite and matches the asymptotic form", "[specfun]") {
    const double expected = 1000.0 - 0.5 * std::log(2000.0 * kPi);
    CHECK(specfun::log_i0(1000.0) == Approx(expected).epsilon(1e-4));
    // Tight asymptotic correction: relative agreement of the full value.
    CHECK(specfun::log_i0(1000.0) ==
          Approx(1000.0 + std::log(specfun::bessel_i0_scaled(1000.0))).epsilon(1e-12));
    CHECK(specfun::log_i0(5.0) == Approx(std::log(specfun::bessel_i0(5.0))).epsilon(1e-12));
}

TEST_CASE("i1_over_i0 shape", "[specfun]") {
    CHECK(specfun::i1_over_i0(0.0) == 0.0);
    double prev = -1.0;
    for (double x = 0.0; x <= 60.0; x += 0.5) {
        const double v = specfun::i1_over_i0(x);
        CHECK(v >= prev);
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        prev = v;
    }
    // Large-argument approximation 1 - 1/(2x) with sandwich bound 1/(2x^2).
    CHECK(std::fabs(specfun::i1_over_i0(50.0) - (1.0 - 1.0 / 100.0)) < 1e-4);
    for (double x : {10.0, 15.0, 20.0, 30.0, 50.0, 100.0})
        CHECK(std::fabs(specfun::i1_over_i0(x) - (1.0 - 0.5 / x)) <= 0.5 / (x * x));
}

TEST_CASE("sample_complex_gaussian moments and determinism", "[specfun]") {
    CHECK_THROWS_AS([] {
        std::mt19937_64 rng(1);
        return specfun::sample_complex_gaussian(rng, 0.0);
    }(), std::invalid_argument);

    std::mt19937_64 rng(123);
    const int n = 1000000;
    const double var = 2.0;
    double p = 0.0;
    cdouble mean(0.0, 0.0);
    for (int i = 0; i < n; ++i) {
        const cdouble w = specfun::sample_complex_gaussian(rng, var);
        p += std::norm(w);
        mean += w;
    }
    p /= n;
    mean /= static_cast<double>(n);
    CHECK(std::fabs(p - var) < 0.01);
    // E[w] = 0 within 3 standard errors of each component.
    const double se = std::sqrt(var / 2.0 / n);
    CHECK(std::fabs(mean.real()) < 3.0 * se);
    CHECK(std::fabs(mean.imag()) < 3.0 * se);

    std::mt19937_64 a(99), b(99);
    for (int i = 0; i < 100; ++i)
        CHECK(specfun::sample_complex_gaussian(a, 1.0) ==
              specfun::sample_complex_gaussian(b, 1.0));
}

TEST_CASE("sample amplitude passes a Rayleigh KS test", "[specfun]") {
    std::mt19937_64 rng(2024);
    const double var = 0.7;
    std::vector<double> amp(100000);
    for (auto& z : amp)
        z = std::abs(specfun::sample_complex_gaussian(rng, var));
    const double d = oracles::ks_statistic(
        amp, [&](double z) { return 1.0 - std::exp(-z * z / var); });
    CHECK(d < oracles::ks_critical_01(amp.size()));
}
