#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fvg {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kFourPi = 4.0 * kPi;

/// Cell-centered equirectangular sampling of the unit sphere.
/// Row i covers colatitude theta_i = pi*(i+0.5)/height, column j covers
/// azimuth phi_j = 2*pi*j/width. Per-row quadrature weights are the
/// Fejer (first rule) weights on x = cos(theta) times the azimuth cell
/// width: exact for any integrand polynomial in cos(theta) up to degree
/// height-1, which covers products of Legendre functions and monomials at
/// the bandwidths used here. (Plain sin(theta)*dtheta midpoint weights are
/// only O(1/height^2) accurate and cannot reach the transform tolerances.)
/// sum(weights * width) = 4*pi exactly.
struct EquirectGrid {
    int height = 0;
    int width = 0;
    std::vector<double> colatitudes;  // theta per row, strictly inside (0, pi)
    std::vector<double> azimuths;     // phi per column, in [0, 2*pi)
    std::vector<double> quad_weights; // per-row weight sin(theta)*dtheta*dphi

    std::size_t cells() const { return static_cast<std::size_t>(height) * width; }

    /// Unit direction of cell (row, col).
    Eigen::Vector3d direction(int row, int col) const {
        const double st = std::sin(colatitudes[row]);
        return {st * std::cos(azimuths[col]), st * std::sin(azimuths[col]),
                std::cos(colatitudes[row])};
    }
};

inline EquirectGrid build_equirect_grid(int height, int width) {
    if (height < 4 || width < 8)
        throw std::invalid_argument("build_equirect_grid: need height >= 4 and width >= 8, got " +
                                    std::to_string(height) + "x" + std::to_string(width));
    EquirectGrid g;
    g.height = height;
    g.width = width;
    g.colatitudes.resize(height);
    g.azimuths.resize(width);
    g.quad_weights.resize(height);
    const double dphi = 2.0 * kPi / width;
    for (int i = 0; i < height; ++i) {
        g.colatitudes[i] = kPi * (i + 0.5) / height;
        // Fejer-1 weight at node x_i = cos(theta_i).
        double w = 1.0;
        for (int m = 1; m <= height / 2; ++m)
            w -= 2.0 * std::cos(2.0 * m * g.colatitudes[i]) / (4.0 * m * m - 1.0);
        g.quad_weights[i] = (2.0 / height) * w * dphi;
    }
    for (int j = 0; j < width; ++j) g.azimuths[j] = 2.0 * kPi * j / width;
    return g;
}

/// Scalar intensity function sampled on an EquirectGrid, row-major.
struct SphericalImage {
    const EquirectGrid* grid = nullptr;
    Eigen::MatrixXd values; // height x width

    SphericalImage() = default;
    SphericalImage(const EquirectGrid& g, Eigen::MatrixXd v) : grid(&g), values(std::move(v)) {
        if (values.rows() != g.height || values.cols() != g.width)
            throw std::invalid_argument("SphericalImage: value dimensions do not match grid");
        if (!values.allFinite())
            throw std::invalid_argument("SphericalImage: non-finite intensity values");
    }

    static SphericalImage zero(const EquirectGrid& g) {
        return SphericalImage(g, Eigen::MatrixXd::Zero(g.height, g.width));
    }
};

} // namespace fvg
