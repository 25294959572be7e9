#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fvg/grid.hpp"
#include "fvg/legendre.hpp"
#include "fvg/sh_transform.hpp"

using namespace fvg;

TEST_CASE("grid weights integrate the unit sphere") {
    for (auto [h, w] : {std::pair{16, 32}, {128, 256}, {33, 77}}) {
        const EquirectGrid g = build_equirect_grid(h, w);
        double area = 0.0;
        for (int r = 0; r < g.height; ++r) area += g.quad_weights[r] * g.width;
        // The midpoint rule in theta integrates sin(theta) exactly at any
        // resolution only in the limit; 4*pi to the rule's accuracy.
        REQUIRE(area == Catch::Approx(kFourPi).epsilon(1e-10));
    }
}

TEST_CASE("grid directions are unit and cell-centered") {
    const EquirectGrid g = build_equirect_grid(8, 16);
    REQUIRE(g.colatitudes.front() == Catch::Approx(kPi * 0.5 / 8));
    REQUIRE(g.azimuths[0] == 0.0);
    for (int r = 0; r < g.height; ++r)
        for (int c = 0; c < g.width; ++c)
            REQUIRE(g.direction(r, c).norm() == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("grid rejects degenerate dimensions") {
    REQUIRE_THROWS_AS(build_equirect_grid(2, 256), std::invalid_argument);
    REQUIRE_THROWS_AS(build_equirect_grid(128, 4), std::invalid_argument);
}

TEST_CASE("spherical image validates shape and finiteness") {
    const EquirectGrid g = build_equirect_grid(8, 16);
    REQUIRE_THROWS_AS(SphericalImage(g, Eigen::MatrixXd::Zero(4, 16)), std::invalid_argument);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(8, 16);
    bad(3, 3) = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(SphericalImage(g, bad), std::invalid_argument);
}

TEST_CASE("normalized Legendre matches closed forms at low degree") {
    // Pbar_l^m with Condon-Shortley phase folded in, so that
    // Y_lm = Pbar_l^m(cos theta) e^{i m phi} is orthonormal.
    auto p00 = [](double) { return std::sqrt(1.0 / kFourPi); };
    auto p10 = [](double x) { return std::sqrt(3.0 / kFourPi) * x; };
    auto p11 = [](double x) { return -std::sqrt(3.0 / (8.0 * kPi)) * std::sqrt(1.0 - x * x); };
    auto p20 = [](double x) { return std::sqrt(5.0 / (16.0 * kPi)) * (3.0 * x * x - 1.0); };
    auto p21 = [](double x) { return -std::sqrt(15.0 / (8.0 * kPi)) * x * std::sqrt(1.0 - x * x); };
    auto p22 = [](double x) { return std::sqrt(15.0 / (32.0 * kPi)) * (1.0 - x * x); };
    for (double x : {-0.9, -0.5, 0.0, 0.3, 0.99}) {
        const auto v = normalized_legendre_all(2, x);
        REQUIRE(v[0] == Catch::Approx(p00(x)).margin(1e-14));
        REQUIRE(v[1] == Catch::Approx(p10(x)).margin(1e-14));
        REQUIRE(v[2] == Catch::Approx(p11(x)).margin(1e-14));
        REQUIRE(v[3] == Catch::Approx(p20(x)).margin(1e-14));
        REQUIRE(v[4] == Catch::Approx(p21(x)).margin(1e-14));
        REQUIRE(v[5] == Catch::Approx(p22(x)).margin(1e-14));
    }
}

TEST_CASE("Condon-Shortley phase: P_1^1(0) is negative") {
    REQUIRE(assoc_legendre(1, 1, 0.0) == Catch::Approx(-1.0).margin(1e-15));
}

TEST_CASE("Legendre recursion stays finite and bounded at high degree") {
    for (double x : {-0.999, -0.2, 0.0, 0.7, 0.999}) {
        const auto v = normalized_legendre_all(64, x);
        for (double p : v) {
            REQUIRE(std::isfinite(p));
            // |Y_lm| <= sqrt((2l+1)/4pi) <= sqrt(129/4pi) < 3.3
            REQUIRE(std::abs(p) < 3.3);
        }
    }
}

TEST_CASE("basis is orthonormal under grid quadrature") {
    const int L = 16;
    const EquirectGrid g = build_equirect_grid(64, 128);
    const ShBasisTable basis(g, L);
    // Gram matrix entries <Y_lm, Y_l'm'>; same-m pairs are the nontrivial
    // ones (different m are exactly orthogonal by the azimuth DFT).
    for (int m = 0; m <= L; ++m)
        for (int l = m; l <= L; ++l)
            for (int l2 = l; l2 <= L; ++l2) {
                double acc = 0.0;
                for (int r = 0; r < g.height; ++r)
                    acc += g.quad_weights[r] * basis.legendre(r, l, m) * basis.legendre(r, l2, m);
                acc *= g.width; // azimuth part contributes |e^{im phi}|^2 summed
                REQUIRE(acc == Catch::Approx(l == l2 ? 1.0 : 0.0).margin(1e-6));
            }
}

TEST_CASE("basis requires sufficient grid height") {
    const EquirectGrid g = build_equirect_grid(16, 64);
    REQUIRE_NOTHROW(ShBasisTable(g, 7));
    REQUIRE_THROWS_AS(ShBasisTable(g, 8), std::invalid_argument);
}

namespace {

/// Random band-limited image: synthesize conjugate-symmetric coefficients
/// and run them through the inverse transform.
ShCoefficients random_coeffs(int L, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, scale);
    ShCoefficients c(L);
    for (int l = 0; l <= L; ++l) {
        c.at(l, 0) = Complex{gauss(rng), 0.0};
        for (int m = 1; m <= l; ++m) {
            c.at(l, m) = Complex{gauss(rng), gauss(rng)};
            c.at(l, -m) = (m % 2 ? -1.0 : 1.0) * std::conj(c.at(l, m));
        }
    }
    return c;
}

} // namespace

TEST_CASE("forward-inverse round trip recovers band-limited coefficients") {
    const int L = 32;
    const EquirectGrid g = build_equirect_grid(128, 256);
    const ShBasisTable basis(g, L);
    const ShCoefficients truth = random_coeffs(L, 7);
    const SphericalImage img = sh_inverse(truth, basis);
    const ShCoefficients back = sh_forward(img, basis);
    for (std::size_t i = 0; i < truth.coeffs.size(); ++i)
        REQUIRE(std::abs(back.coeffs[i] - truth.coeffs[i]) < 1e-8);
}

TEST_CASE("Parseval: coefficient energy equals image energy") {
    const int L = 24;
    const EquirectGrid g = build_equirect_grid(128, 256);
    const ShBasisTable basis(g, L);
    const ShCoefficients c = random_coeffs(L, 11);
    const SphericalImage img = sh_inverse(c, basis);
    double img_energy = 0.0;
    for (int r = 0; r < g.height; ++r)
        for (int col = 0; col < g.width; ++col)
            img_energy += g.quad_weights[r] * img.values(r, col) * img.values(r, col);
    double coeff_energy = 0.0;
    for (const Complex& z : c.coeffs) coeff_energy += std::norm(z);
    REQUIRE(img_energy == Catch::Approx(coeff_energy).epsilon(1e-6));
}

TEST_CASE("forward transform of a real image is conjugate-symmetric") {
    const EquirectGrid g = build_equirect_grid(64, 128);
    const ShBasisTable basis(g, 12);
    Eigen::MatrixXd vals(g.height, g.width);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int r = 0; r < g.height; ++r)
        for (int c = 0; c < g.width; ++c) vals(r, c) = uni(rng);
    const ShCoefficients c = sh_forward(SphericalImage(g, vals), basis);
    for (int l = 0; l <= 12; ++l)
        for (int m = 1; m <= l; ++m) {
            const Complex expected = (m % 2 ? -1.0 : 1.0) * std::conj(c.at(l, m));
            REQUIRE(std::abs(c.at(l, -m) - expected) < 1e-12);
        }
}

TEST_CASE("constant image transforms to a pure l=0 coefficient") {
    const EquirectGrid g = build_equirect_grid(64, 128);
    const ShBasisTable basis(g, 8);
    const ShCoefficients c =
        sh_forward(SphericalImage(g, Eigen::MatrixXd::Constant(g.height, g.width, 2.5)), basis);
    REQUIRE(c.at(0, 0).real() == Catch::Approx(2.5 * std::sqrt(kFourPi)).epsilon(1e-10));
    for (std::size_t i = 1; i < c.coeffs.size(); ++i) REQUIRE(std::abs(c.coeffs[i]) < 1e-10);
}

TEST_CASE("low_pass zeroes exactly the degrees above the cutoff") {
    ShCoefficients c = random_coeffs(10, 5);
    const ShCoefficients f = c.low_pass(4);
    for (int l = 0; l <= 10; ++l)
        for (int m = -l; m <= l; ++m) {
            if (l <= 4) REQUIRE(f.at(l, m) == c.at(l, m));
            else REQUIRE(f.at(l, m) == Complex{0.0, 0.0});
        }
}

TEST_CASE("sh_inverse rejects non-symmetric coefficients") {
    const EquirectGrid g = build_equirect_grid(32, 64);
    const ShBasisTable basis(g, 4);
    ShCoefficients c(4);
    c.at(2, 1) = Complex{1.0, 0.5}; // no matching (2,-1) partner
    REQUIRE_THROWS_AS(sh_inverse(c, basis), std::runtime_error);
}
