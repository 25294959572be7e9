#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fvg/moments.hpp"
#include "fvg/synth.hpp"

using namespace fvg;

namespace {

std::vector<MomentOrder> orders_up_to(int n) {
    std::vector<MomentOrder> out;
    for (int t = 0; t <= n; ++t)
        for (int i = t; i >= 0; --i)
            for (int j = t - i; j >= 0; --j) out.push_back({i, j, t - i - j});
    return out;
}

} // namespace

TEST_CASE("table enumerates all monomials up to max_order") {
    const MomentCoefficientTable t(32, 9, 128, 256);
    REQUIRE(t.orders().size() == 220); // C(12, 3)
    REQUIRE(t.lm_count() == 1089);
    REQUIRE(t.raw().size() == 220 * 1089);
    for (const MomentOrder& o : orders_up_to(9)) REQUIRE(t.contains(o));
    REQUIRE_FALSE(t.contains({5, 5, 0}));
    REQUIRE_THROWS_AS(t.order_index({10, 0, 0}), std::out_of_range);
}

TEST_CASE("build_coeff_table rejects insufficient grid resolution") {
    const EquirectGrid g = build_equirect_grid(16, 64);
    const ShBasisTable basis(g, 7);
    REQUIRE_THROWS_AS(build_coeff_table(7, 9, g, basis), std::invalid_argument);
}

TEST_CASE("C^{000}_{00} equals the area of Y_00") {
    const EquirectGrid g = build_equirect_grid(64, 128);
    const ShBasisTable basis(g, 8);
    const MomentCoefficientTable t = build_coeff_table(8, 3, g, basis);
    REQUIRE(t.at({0, 0, 0}, 0, 0).real() == Catch::Approx(std::sqrt(kFourPi)).epsilon(1e-12));
    REQUIRE(std::abs(t.at({0, 0, 0}, 0, 0).imag()) < 1e-14);
}

TEST_CASE("separable table build matches direct quadrature") {
    const EquirectGrid g = build_equirect_grid(48, 96);
    const ShBasisTable basis(g, 10);
    const MomentCoefficientTable t = build_coeff_table(10, 4, g, basis);
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> pick_l(0, 10);
    for (const MomentOrder& o : {MomentOrder{0, 0, 1}, {1, 0, 0}, {2, 1, 0}, {1, 1, 2}, {0, 3, 1}}) {
        for (int rep = 0; rep < 6; ++rep) {
            const int l = pick_l(rng);
            std::uniform_int_distribution<int> pick_m(-l, l);
            const int m = pick_m(rng);
            const Complex direct = moment_coeff(l, m, o, g, basis);
            REQUIRE(std::abs(t.at(o, l, m) - direct) < 1e-10);
        }
    }
}

TEST_CASE("C vanishes for l above the monomial order and under parity mismatch") {
    const EquirectGrid g = build_equirect_grid(64, 128);
    const ShBasisTable basis(g, 12);
    const MomentCoefficientTable t = build_coeff_table(12, 3, g, basis);
    for (const MomentOrder& o : orders_up_to(3))
        for (int l = 0; l <= 12; ++l)
            for (int m = -l; m <= l; ++m) {
                if (l > o.total()) // x^i y^j z^k has no SH content above degree i+j+k
                    REQUIRE(std::abs(t.at(o, l, m)) < 1e-10);
                else if ((l + o.total()) % 2 != 0) // opposite parity under s -> -s
                    REQUIRE(std::abs(t.at(o, l, m)) < 1e-10);
                else if (std::abs(m) > o.i + o.j) // azimuth selection rule
                    REQUIRE(std::abs(t.at(o, l, m)) < 1e-10);
            }
}

namespace {

ShCoefficients scene_coeffs(const SceneFunction& scene, const EquirectGrid& g,
                            const ShBasisTable& basis, const Eigen::Matrix3d& R,
                            Visibility vis = Visibility::Whole) {
    return sh_forward(render(scene, R, g, vis), basis);
}

} // namespace

TEST_CASE("harmonic-domain moments match direct quadrature on random scenes") {
    const int L = 32;
    const EquirectGrid g = build_equirect_grid(128, 256);
    const ShBasisTable basis(g, L);
    const MomentCoefficientTable t = build_coeff_table(L, 3, g, basis);
    const auto orders = orders_up_to(3);
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        const SceneFunction scene = make_scene(seed, 8);
        // Band-limit the scene exactly so both sides integrate the same
        // function: project, reconstruct, and compare on the reconstruction.
        const ShCoefficients coeffs = scene_coeffs(scene, g, basis, Eigen::Matrix3d::Identity());
        const SphericalImage band_limited = sh_inverse(coeffs, basis, 1e-6);
        const MomentVector fast = moments_from_sh(coeffs, t, orders);
        const MomentVector direct = moments_direct(band_limited, orders);
        for (const MomentOrder& o : orders) {
            const double scale = std::max(std::abs(direct.at(o)), 1e-12);
            REQUIRE(std::abs(fast.at(o) - direct.at(o)) / scale < 1e-6);
        }
    }
}

TEST_CASE("moments are linear in the image") {
    const int L = 16;
    const EquirectGrid g = build_equirect_grid(64, 128);
    const ShBasisTable basis(g, L);
    const MomentCoefficientTable t = build_coeff_table(L, 2, g, basis);
    const auto orders = orders_up_to(2);
    const ShCoefficients a = scene_coeffs(make_scene(10, 5), g, basis, Eigen::Matrix3d::Identity());
    const ShCoefficients b = scene_coeffs(make_scene(11, 5), g, basis, Eigen::Matrix3d::Identity());
    ShCoefficients mix(L);
    for (std::size_t i = 0; i < mix.coeffs.size(); ++i)
        mix.coeffs[i] = 2.0 * a.coeffs[i] - 0.5 * b.coeffs[i];
    const MomentVector ma = moments_from_sh(a, t, orders);
    const MomentVector mb = moments_from_sh(b, t, orders);
    const MomentVector mm = moments_from_sh(mix, t, orders);
    for (const MomentOrder& o : orders)
        REQUIRE(mm.at(o) == Catch::Approx(2.0 * ma.at(o) - 0.5 * mb.at(o)).margin(1e-12));
}

TEST_CASE("first-order moment vector rotates with the image") {
    const int L = 32;
    const EquirectGrid g = build_equirect_grid(128, 256);
    const ShBasisTable basis(g, L);
    const MomentCoefficientTable t = build_coeff_table(L, 1, g, basis);
    const std::vector<MomentOrder> first = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    const SceneFunction scene = make_scene(21, 8);
    const Eigen::Matrix3d R =
        axis_angle_to_rot(Eigen::Vector3d(0.3, -0.2, 0.5).normalized() * 0.7);

    const MomentVector m0 = moments_from_sh(
        scene_coeffs(scene, g, basis, Eigen::Matrix3d::Identity()), t, first);
    const MomentVector m1 = moments_from_sh(scene_coeffs(scene, g, basis, R), t, first);
    const Eigen::Vector3d v0{m0.at({1, 0, 0}), m0.at({0, 1, 0}), m0.at({0, 0, 1})};
    const Eigen::Vector3d v1{m1.at({1, 0, 0}), m1.at({0, 1, 0}), m1.at({0, 0, 1})};
    // I'(s) = I(R^T s) implies m' = R m by change of variables; only the
    // sub-band-limit part of the blobs contributes equally, hence 1e-6.
    REQUIRE((v1 - R * v0).norm() < 1e-6 * std::max(v0.norm(), 1e-12));
}

TEST_CASE("moments_from_sh rejects bandwidth overrun") {
    const MomentCoefficientTable t(8, 2, 64, 128);
    ShCoefficients c(16);
    REQUIRE_THROWS_AS(moments_from_sh(c, t, {{0, 0, 0}}), std::invalid_argument);
}
