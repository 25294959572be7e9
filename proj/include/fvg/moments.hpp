#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fvg/grid.hpp"
#include "fvg/sh_transform.hpp"

namespace fvg {

/// Monomial exponents (i, j, k) of x^i y^j z^k.
struct MomentOrder {
    int i = 0, j = 0, k = 0;

    int total() const { return i + j + k; }
    friend bool operator==(const MomentOrder&, const MomentOrder&) = default;
    friend auto operator<=>(const MomentOrder& a, const MomentOrder& b) {
        return std::tie(a.i, a.j, a.k) <=> std::tie(b.i, b.j, b.k);
    }
};

using MomentVector = std::map<MomentOrder, double>;

/// Precomputed coefficients C^{ijk}_{lm} = integral of x^i y^j z^k Y_lm
/// over the sphere, for all monomials with i+j+k <= max_order and all
/// l <= L. Stored flat with (l, m) innermost so that a moment evaluation
/// is one contiguous complex dot product.
class MomentCoefficientTable {
  public:
    MomentCoefficientTable(int bandwidth, int max_order, int grid_height, int grid_width)
        : bandwidth_(bandwidth), max_order_(max_order),
          grid_height_(grid_height), grid_width_(grid_width) {
        if (max_order < 0) throw std::invalid_argument("MomentCoefficientTable: max_order must be >= 0");
        const int side = max_order + 1;
        monomial_index_.assign(static_cast<std::size_t>(side) * side * side, -1);
        for (int n = 0; n <= max_order; ++n)
            for (int i = n; i >= 0; --i)
                for (int j = n - i; j >= 0; --j) {
                    const int k = n - i - j;
                    monomial_index_[(static_cast<std::size_t>(i) * side + j) * side + k] =
                        static_cast<int>(orders_.size());
                    orders_.push_back({i, j, k});
                }
        entries_.assign(orders_.size() * lm_count(), Complex{0.0, 0.0});
    }

    int bandwidth() const { return bandwidth_; }
    int max_order() const { return max_order_; }
    int grid_height() const { return grid_height_; }
    int grid_width() const { return grid_width_; }
    std::size_t lm_count() const { return static_cast<std::size_t>(bandwidth_ + 1) * (bandwidth_ + 1); }
    const std::vector<MomentOrder>& orders() const { return orders_; }

    bool contains(const MomentOrder& o) const {
        return o.i >= 0 && o.j >= 0 && o.k >= 0 && o.total() <= max_order_;
    }

    int order_index(const MomentOrder& o) const {
        if (!contains(o))
            throw std::out_of_range("MomentCoefficientTable: order (" + std::to_string(o.i) + "," +
                                    std::to_string(o.j) + "," + std::to_string(o.k) +
                                    ") beyond table maximum " + std::to_string(max_order_));
        const int side = max_order_ + 1;
        return monomial_index_[(static_cast<std::size_t>(o.i) * side + o.j) * side + o.k];
    }

    /// Contiguous (l, m) block for one monomial, flat index l*(l+1)+m.
    const Complex* row(const MomentOrder& o) const {
        return entries_.data() + static_cast<std::size_t>(order_index(o)) * lm_count();
    }
    Complex* row_mutable(const MomentOrder& o) {
        return entries_.data() + static_cast<std::size_t>(order_index(o)) * lm_count();
    }

    Complex at(const MomentOrder& o, int l, int m) const {
        return row(o)[static_cast<std::size_t>(l) * (l + 1) + m];
    }

    const std::vector<Complex>& raw() const { return entries_; }
    std::vector<Complex>& raw_mutable() { return entries_; }

  private:
    int bandwidth_;
    int max_order_;
    int grid_height_;
    int grid_width_;
    std::vector<MomentOrder> orders_;
    std::vector<int> monomial_index_;
    std::vector<Complex> entries_;
};

/// Single moment coefficient by direct quadrature of x^i y^j z^k * Y_lm.
inline Complex moment_coeff(int l, int m, const MomentOrder& order, const EquirectGrid& grid,
                            const ShBasisTable& basis) {
    if (l > basis.bandwidth())
        throw std::invalid_argument("moment_coeff: degree exceeds basis bandwidth");
    Complex acc{0.0, 0.0};
    for (int r = 0; r < grid.height; ++r) {
        const double st = std::sin(grid.colatitudes[r]);
        const double ct = std::cos(grid.colatitudes[r]);
        const double zk = std::pow(ct, order.k);
        for (int c = 0; c < grid.width; ++c) {
            const double x = st * std::cos(grid.azimuths[c]);
            const double y = st * std::sin(grid.azimuths[c]);
            acc += grid.quad_weights[r] * std::pow(x, order.i) * std::pow(y, order.j) * zk *
                   basis.sample(r, c, l, m);
        }
    }
    return acc;
}

/// Build the full C table. The quadrature factors over colatitude and
/// azimuth, which brings the cost down to O(H * monomials * (L+1)^2)
/// instead of touching every grid cell per entry.
inline MomentCoefficientTable build_coeff_table(int bandwidth, int max_order,
                                                const EquirectGrid& grid, const ShBasisTable& basis) {
    if (bandwidth > basis.bandwidth())
        throw std::invalid_argument("build_coeff_table: bandwidth exceeds basis bandwidth");
    if (grid.height < bandwidth + max_order + 1)
        throw std::invalid_argument("build_coeff_table: grid height " + std::to_string(grid.height) +
                                    " insufficient for bandwidth L=" + std::to_string(bandwidth) +
                                    " with max_order=" + std::to_string(max_order) +
                                    "; integrand bandwidth requires height >= " +
                                    std::to_string(bandwidth + max_order + 1));

    MomentCoefficientTable table(bandwidth, max_order, grid.height, grid.width);

    // A(i, j, m) = sum over columns of cos^i(phi) sin^j(phi) e^{i m phi}
    const int side = max_order + 1;
    std::vector<Complex> A(static_cast<std::size_t>(side) * side * (bandwidth + 1), Complex{0.0, 0.0});
    auto a_at = [&](int i, int j, int m) -> Complex& {
        return A[(static_cast<std::size_t>(i) * side + j) * (bandwidth + 1) + m];
    };
    for (int c = 0; c < grid.width; ++c) {
        const double cp = std::cos(grid.azimuths[c]);
        const double sp = std::sin(grid.azimuths[c]);
        double cpi = 1.0;
        for (int i = 0; i <= max_order; ++i) {
            double spj = 1.0;
            for (int j = 0; i + j <= max_order; ++j) {
                for (int m = 0; m <= bandwidth; ++m)
                    a_at(i, j, m) += cpi * spj * basis.azimuth(c, m);
                spj *= sp;
            }
            cpi *= cp;
        }
    }

    // Colatitude sums, one pass per monomial over all (l, m >= 0).
    for (const MomentOrder& o : table.orders()) {
        Complex* out = table.row_mutable(o);
        std::vector<double> theta_sum(static_cast<std::size_t>(bandwidth + 1) * (bandwidth + 2) / 2, 0.0);
        for (int r = 0; r < grid.height; ++r) {
            const double st = std::sin(grid.colatitudes[r]);
            const double ct = std::cos(grid.colatitudes[r]);
            const double f = grid.quad_weights[r] * std::pow(st, o.i + o.j) * std::pow(ct, o.k);
            std::size_t idx = 0;
            for (int l = 0; l <= bandwidth; ++l)
                for (int m = 0; m <= l; ++m, ++idx)
                    theta_sum[idx] += f * basis.legendre(r, l, m);
        }
        std::size_t idx = 0;
        for (int l = 0; l <= bandwidth; ++l)
            for (int m = 0; m <= l; ++m, ++idx) {
                const Complex c_pos = theta_sum[idx] * a_at(o.i, o.j, m);
                out[static_cast<std::size_t>(l) * (l + 1) + m] = c_pos;
                if (m > 0) {
                    // Y_{l,-m} = (-1)^m Pbar_l^m e^{-i m phi}; the azimuth
                    // factor is real-weighted, so conjugate and sign-flip.
                    const double sign = (m % 2 != 0) ? -1.0 : 1.0;
                    out[static_cast<std::size_t>(l) * (l + 1) - m] =
                        sign * theta_sum[idx] * std::conj(a_at(o.i, o.j, m));
                }
            }
    }
    return table;
}

/// Moments from SH coefficients: m_ijk = sum_lm I_lm * C^{ijk}_{lm}.
/// The imaginary residue of each sum is validated before being discarded;
/// exceeding the tolerance signals a convention bug upstream.
inline MomentVector moments_from_sh(const ShCoefficients& coeffs, const MomentCoefficientTable& table,
                                    const std::vector<MomentOrder>& orders) {
    if (coeffs.bandwidth > table.bandwidth())
        throw std::invalid_argument("moments_from_sh: coefficient bandwidth exceeds table bandwidth");
    const std::size_t n = ShCoefficients::size_for(coeffs.bandwidth);
    MomentVector out;
    for (const MomentOrder& o : orders) {
        const Complex* c = table.row(o);
        Complex acc{0.0, 0.0};
        for (std::size_t idx = 0; idx < n; ++idx) acc += coeffs.coeffs[idx] * c[idx];
        if (std::abs(acc.imag()) > 1e-7 * std::abs(acc) + 1e-9)
            throw std::runtime_error("moments_from_sh: imaginary residue " +
                                     std::to_string(acc.imag()) + " out of tolerance for order (" +
                                     std::to_string(o.i) + "," + std::to_string(o.j) + "," +
                                     std::to_string(o.k) + ")");
        out[o] = acc.real();
    }
    return out;
}

/// Ground-truth oracle: direct quadrature of x^i y^j z^k * I over the grid.
inline MomentVector moments_direct(const SphericalImage& image, const std::vector<MomentOrder>& orders) {
    const EquirectGrid& g = *image.grid;
    MomentVector out;
    for (const MomentOrder& o : orders) out[o] = 0.0;
    for (int r = 0; r < g.height; ++r) {
        const double st = std::sin(g.colatitudes[r]);
        const double ct = std::cos(g.colatitudes[r]);
        for (int c = 0; c < g.width; ++c) {
            const double wI = g.quad_weights[r] * image.values(r, c);
            if (wI == 0.0) continue;
            const double x = st * std::cos(g.azimuths[c]);
            const double y = st * std::sin(g.azimuths[c]);
            for (auto& [o, acc] : out)
                acc += wI * std::pow(x, o.i) * std::pow(y, o.j) * std::pow(ct, o.k);
        }
    }
    return out;
}

} // namespace fvg
