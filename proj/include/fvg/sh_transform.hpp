#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fvg/grid.hpp"
#include "fvg/legendre.hpp"

namespace fvg {

using Complex = std::complex<double>;

/// Spherical-harmonic basis samples on a grid, stored factored:
/// normalized Legendre values per row times complex azimuth exponentials
/// per column, Y_lm(theta_r, phi_c) = Pbar_l^m(cos theta_r) * e^{i m phi_c}.
class ShBasisTable {
  public:
    ShBasisTable(const EquirectGrid& grid, int bandwidth)
        : grid_(&grid), bandwidth_(bandwidth) {
        if (bandwidth < 0) throw std::invalid_argument("ShBasisTable: bandwidth must be >= 0");
        const int min_height = 2 * (bandwidth + 1);
        if (grid.height < min_height)
            throw std::invalid_argument("ShBasisTable: grid height " + std::to_string(grid.height) +
                                        " insufficient for bandwidth L=" + std::to_string(bandwidth) +
                                        "; minimum height is " + std::to_string(min_height));
        const int npairs = (bandwidth + 1) * (bandwidth + 2) / 2;
        legendre_.resize(grid.height, npairs);
        for (int r = 0; r < grid.height; ++r) {
            const auto row = normalized_legendre_all(bandwidth, std::cos(grid.colatitudes[r]));
            for (int k = 0; k < npairs; ++k) legendre_(r, k) = row[k];
        }
        azimuth_.resize(grid.width, bandwidth + 1);
        for (int c = 0; c < grid.width; ++c)
            for (int m = 0; m <= bandwidth; ++m)
                azimuth_(c, m) = std::polar(1.0, m * grid.azimuths[c]);
    }

    const EquirectGrid& grid() const { return *grid_; }
    int bandwidth() const { return bandwidth_; }

    /// Pbar_l^m(cos theta_row), m >= 0.
    double legendre(int row, int l, int m) const {
        return legendre_(row, static_cast<Eigen::Index>(l) * (l + 1) / 2 + m);
    }
    /// e^{i m phi_col}, m >= 0.
    Complex azimuth(int col, int m) const { return azimuth_(col, m); }

    /// Y_lm at cell (row, col), any -l <= m <= l.
    Complex sample(int row, int col, int l, int m) const {
        if (m >= 0) return legendre(row, l, m) * azimuth_(col, m);
        const double sign = (((-m) % 2) != 0) ? -1.0 : 1.0;
        return sign * legendre(row, l, -m) * std::conj(azimuth_(col, -m));
    }

  private:
    const EquirectGrid* grid_;
    int bandwidth_;
    Eigen::MatrixXd legendre_;                                        // rows x (l,m>=0) pairs
    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic> azimuth_;  // cols x (m+1)
};

inline ShBasisTable sh_basis_table(const EquirectGrid& grid, int bandwidth) {
    return ShBasisTable(grid, bandwidth);
}

/// Complex SH coefficients of a band-limited spherical function,
/// flat-indexed by l*(l+1)+m for 0 <= l <= L, -l <= m <= l.
struct ShCoefficients {
    int bandwidth = 0;
    std::vector<Complex> coeffs;

    static std::size_t size_for(int L) { return static_cast<std::size_t>(L + 1) * (L + 1); }

    explicit ShCoefficients(int L = 0) : bandwidth(L), coeffs(size_for(L), Complex{0.0, 0.0}) {}

    Complex& at(int l, int m) { return coeffs[static_cast<std::size_t>(l) * (l + 1) + m]; }
    Complex at(int l, int m) const { return coeffs[static_cast<std::size_t>(l) * (l + 1) + m]; }

    /// Zero all coefficients with l > cutoff (low-pass truncation filter).
    ShCoefficients low_pass(int cutoff) const {
        ShCoefficients out = *this;
        for (int l = cutoff + 1; l <= bandwidth; ++l)
            for (int m = -l; m <= l; ++m) out.at(l, m) = Complex{0.0, 0.0};
        return out;
    }
};

/// Forward transform: I_lm = sum over cells of w * I * conj(Y_lm).
/// Separable: an azimuth sum per (row, m) followed by a Legendre-weighted
/// colatitude sum. Negative orders come from conjugate symmetry of the
/// real-valued input.
inline ShCoefficients sh_forward(const SphericalImage& image, const ShBasisTable& basis) {
    if (image.grid != &basis.grid())
        throw std::invalid_argument("sh_forward: image grid does not match basis grid");
    const EquirectGrid& g = basis.grid();
    const int L = basis.bandwidth();

    // G(r, m) = sum_c I(r, c) * e^{-i m phi_c}
    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic> G(g.height, L + 1);
    for (int r = 0; r < g.height; ++r)
        for (int m = 0; m <= L; ++m) {
            Complex acc{0.0, 0.0};
            for (int c = 0; c < g.width; ++c) acc += image.values(r, c) * std::conj(basis.azimuth(c, m));
            G(r, m) = acc;
        }

    ShCoefficients out(L);
    for (int l = 0; l <= L; ++l)
        for (int m = 0; m <= l; ++m) {
            Complex acc{0.0, 0.0};
            for (int r = 0; r < g.height; ++r) acc += g.quad_weights[r] * basis.legendre(r, l, m) * G(r, m);
            out.at(l, m) = acc;
            if (m > 0) {
                const double sign = (m % 2 != 0) ? -1.0 : 1.0;
                out.at(l, -m) = sign * std::conj(acc);
            }
        }
    return out;
}

/// Inverse transform: I(s) = sum_lm I_lm Y_lm(s), real part. For
/// conjugate-symmetric coefficients the imaginary residue is at rounding
/// level; it is checked against `imag_tol` and discarded.
inline SphericalImage sh_inverse(const ShCoefficients& coeffs, const ShBasisTable& basis,
                                 double imag_tol = 1e-9) {
    if (coeffs.bandwidth > basis.bandwidth())
        throw std::invalid_argument("sh_inverse: coefficient bandwidth exceeds basis bandwidth");
    const EquirectGrid& g = basis.grid();
    const int L = coeffs.bandwidth;

    // F(r, m) = sum_l I_lm * Pbar-part of Y_lm at row r, for m in [-L, L]
    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic> F =
        Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>::Zero(g.height, 2 * L + 1);
    for (int r = 0; r < g.height; ++r)
        for (int l = 0; l <= L; ++l)
            for (int m = -l; m <= l; ++m) {
                const int am = std::abs(m);
                double p = basis.legendre(r, l, am);
                if (m < 0 && am % 2 != 0) p = -p;
                F(r, m + L) += coeffs.at(l, m) * p;
            }

    Eigen::MatrixXd vals(g.height, g.width);
    double max_imag = 0.0;
    for (int r = 0; r < g.height; ++r)
        for (int c = 0; c < g.width; ++c) {
            Complex acc = F(r, L); // m = 0
            for (int m = 1; m <= L; ++m) {
                const Complex e = basis.azimuth(c, m);
                acc += F(r, m + L) * e + F(r, -m + L) * std::conj(e);
            }
            max_imag = std::max(max_imag, std::abs(acc.imag()));
            vals(r, c) = acc.real();
        }
    if (max_imag > imag_tol)
        throw std::runtime_error("sh_inverse: imaginary residue " + std::to_string(max_imag) +
                                 " exceeds tolerance; coefficients are not conjugate-symmetric");
    return SphericalImage(g, std::move(vals));
}

} // namespace fvg
