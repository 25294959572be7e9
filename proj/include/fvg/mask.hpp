#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fvg/moments.hpp"
#include "fvg/sh_transform.hpp"

namespace fvg {

/// Soft spherical-cap mask along an axis: zero below the transition band,
/// an exponential ramp on [z0-r, z0+r], one above it.
struct MaskSpec {
    Eigen::Vector3d center{0.0, 0.0, 1.0}; // unit mask axis
    double z0 = 0.0;                       // transition midpoint along the axis
    double r = 0.5;                        // transition half-range
    double sigma = 0.25;                   // profile softness
    int profile_exponent = 2;              // even, >= 2

    void validate() const {
        if (std::abs(center.norm() - 1.0) > 1e-12)
            throw std::invalid_argument("MaskSpec: center must be a unit vector");
        if (r <= 0.0 || sigma <= 0.0)
            throw std::invalid_argument("MaskSpec: r and sigma must be positive");
        if (profile_exponent < 2 || profile_exponent % 2 != 0)
            throw std::invalid_argument("MaskSpec: profile exponent must be an even integer >= 2");
        // The band top must stay on the sphere; the bottom may extend below
        // t = -1, in which case the off-domain part of the ramp is unused.
        if (z0 + r > 1.0 + 1e-12)
            throw std::invalid_argument("MaskSpec: transition band top z0 + r must be <= 1");
    }
};

/// Ideal profile weight at axis coordinate t = s . center.
inline double mask_profile(double t, const MaskSpec& spec) {
    if (t < spec.z0 - spec.r) return 0.0;
    if (t > spec.z0 + spec.r) return 1.0;
    const double u = t - (spec.z0 + spec.r);
    return std::exp(-std::pow(u, spec.profile_exponent) / std::pow(spec.sigma, spec.profile_exponent));
}

/// Least-squares polynomial approximation of a mask profile, kept both as
/// 1-D coefficients in t and (on demand) expanded into x^a y^b z^c monomials
/// for a given axis direction.
struct PolynomialMask {
    int degree = 0;
    std::vector<double> coeffs; // a_d, d = 0..degree, in t = s . center
    double fit_residual = 0.0;  // max abs deviation from the ideal profile

    double eval(double t) const {
        double acc = 0.0;
        for (std::size_t d = coeffs.size(); d-- > 0;) acc = acc * t + coeffs[d];
        return acc;
    }

    /// Expand sum_d a_d (c . s)^d into monomial coefficients of x^a y^b z^c.
    std::vector<std::pair<MomentOrder, double>> monomials(const Eigen::Vector3d& axis) const {
        std::vector<std::pair<MomentOrder, double>> out;
        std::vector<double> fact(static_cast<std::size_t>(degree) + 1, 1.0);
        for (int d = 1; d <= degree; ++d) fact[d] = fact[d - 1] * d;
        for (int d = 0; d <= degree; ++d) {
            if (coeffs[d] == 0.0) continue;
            for (int a = d; a >= 0; --a)
                for (int b = d - a; b >= 0; --b) {
                    const int c = d - a - b;
                    const double multinom = fact[d] / (fact[a] * fact[b] * fact[c]);
                    const double w = coeffs[d] * multinom * std::pow(axis.x(), a) *
                                     std::pow(axis.y(), b) * std::pow(axis.z(), c);
                    if (w != 0.0) out.push_back({{a, b, c}, w});
                }
        }
        return out;
    }
};

namespace detail {

inline PolynomialMask least_squares_profile_fit(const MaskSpec& spec, int degree, int n_samples = 2048) {
    Eigen::MatrixXd V(n_samples, degree + 1);
    Eigen::VectorXd b(n_samples);
    for (int s = 0; s < n_samples; ++s) {
        const double t = -1.0 + 2.0 * s / (n_samples - 1);
        double p = 1.0;
        for (int d = 0; d <= degree; ++d) {
            V(s, d) = p;
            p *= t;
        }
        b(s) = mask_profile(t, spec);
    }
    Eigen::VectorXd a = V.colPivHouseholderQr().solve(b);
    PolynomialMask out;
    out.degree = degree;
    out.coeffs.assign(a.data(), a.data() + degree + 1);
    out.fit_residual = (V * a - b).cwiseAbs().maxCoeff();
    return out;
}

} // namespace detail

/// Fit the 1-D profile over 2048 uniform samples of t in [-1, 1]. If the
/// residual exceeds the tolerance, degrees up to `max_degree` are probed and
/// the error message names the smallest adequate one (if any).
inline PolynomialMask fit_polynomial_mask(const MaskSpec& spec, int degree, double tolerance = 0.02,
                                          int max_degree = 12) {
    if (degree < 2) throw std::invalid_argument("fit_polynomial_mask: degree must be >= 2");
    spec.validate();
    PolynomialMask fit = detail::least_squares_profile_fit(spec, degree);
    if (fit.fit_residual <= tolerance) return fit;
    for (int d = degree + 1; d <= max_degree; ++d) {
        const PolynomialMask probe = detail::least_squares_profile_fit(spec, d);
        if (probe.fit_residual <= tolerance)
            throw std::runtime_error("fit_polynomial_mask: residual " + std::to_string(fit.fit_residual) +
                                     " above tolerance " + std::to_string(tolerance) +
                                     " at degree " + std::to_string(degree) +
                                     "; smallest adequate degree is " + std::to_string(d));
    }
    throw std::runtime_error("fit_polynomial_mask: residual " + std::to_string(fit.fit_residual) +
                             " above tolerance " + std::to_string(tolerance) + " at degree " +
                             std::to_string(degree) + "; no degree up to " +
                             std::to_string(max_degree) + " is adequate");
}

namespace detail {

struct IcoMesh {
    std::vector<Eigen::Vector3d> verts;
    std::vector<std::array<int, 3>> faces;
};

inline IcoMesh icosahedron() {
    const double p = (1.0 + std::sqrt(5.0)) / 2.0;
    IcoMesh m;
    const double raw[12][3] = {{-1, p, 0}, {1, p, 0},  {-1, -p, 0}, {1, -p, 0},
                               {0, -1, p}, {0, 1, p},  {0, -1, -p}, {0, 1, -p},
                               {p, 0, -1}, {p, 0, 1},  {-p, 0, -1}, {-p, 0, 1}};
    for (const auto& v : raw) m.verts.push_back(Eigen::Vector3d(v[0], v[1], v[2]).normalized());
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
               {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
               {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
               {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    return m;
}

inline IcoMesh subdivide(const IcoMesh& in) {
    IcoMesh out;
    out.verts = in.verts;
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
        const auto key = std::minmax(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        const int idx = static_cast<int>(out.verts.size());
        out.verts.push_back((in.verts[a] + in.verts[b]).normalized());
        midpoint[key] = idx;
        return idx;
    };
    for (const auto& f : in.faces) {
        const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
        out.faces.push_back({f[0], ab, ca});
        out.faces.push_back({f[1], bc, ab});
        out.faces.push_back({f[2], ca, bc});
        out.faces.push_back({ab, bc, ca});
    }
    return out;
}

} // namespace detail

/// Quasi-uniform mask centers. Exact subdivided-icosahedron vertex counts
/// (12, 42, 162, 642, ...) are returned as-is; other counts are a
/// deterministic farthest-point subsample of the next-larger subdivision.
inline std::vector<Eigen::Vector3d> place_mask_centers(int n) {
    if (n < 1) throw std::invalid_argument("place_mask_centers: n must be >= 1");
    detail::IcoMesh mesh = detail::icosahedron();
    while (static_cast<int>(mesh.verts.size()) < n) mesh = detail::subdivide(mesh);
    if (static_cast<int>(mesh.verts.size()) == n) return mesh.verts;

    // Deterministic vertex order, then greedy farthest-point selection.
    std::vector<Eigen::Vector3d> verts = mesh.verts;
    std::sort(verts.begin(), verts.end(), [](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
        return std::tie(a.x(), a.y(), a.z()) < std::tie(b.x(), b.y(), b.z());
    });
    std::vector<Eigen::Vector3d> chosen{verts[0]};
    std::vector<double> dist(verts.size());
    for (std::size_t i = 0; i < verts.size(); ++i)
        dist[i] = std::acos(std::clamp(verts[i].dot(verts[0]), -1.0, 1.0));
    while (static_cast<int>(chosen.size()) < n) {
        const std::size_t best = std::max_element(dist.begin(), dist.end()) - dist.begin();
        chosen.push_back(verts[best]);
        for (std::size_t i = 0; i < verts.size(); ++i)
            dist[i] = std::min(dist[i], std::acos(std::clamp(verts[i].dot(verts[best]), -1.0, 1.0)));
    }
    return chosen;
}

/// Per-mask precomputed masked-moment coefficient vectors
/// Upsilon^{ijk}_{lm} for the three first-order orders, plus mask metadata.
/// Holds a reference to the C table so that Upsilon can be rebuilt for
/// rotated mask centers.
class MaskBank {
  public:
    static constexpr int kOrders = 3; // (1,0,0), (0,1,0), (0,0,1)

    MaskBank(std::vector<MaskSpec> specs, std::vector<PolynomialMask> polys,
             std::shared_ptr<const MomentCoefficientTable> table)
        : specs_(std::move(specs)), polys_(std::move(polys)), table_(std::move(table)) {
        if (specs_.size() != polys_.size())
            throw std::invalid_argument("MaskBank: spec/polynomial count mismatch");
        for (std::size_t k = 0; k < specs_.size(); ++k)
            if (1 + polys_[k].degree > table_->max_order())
                throw std::invalid_argument("MaskBank: C table max_order " +
                                            std::to_string(table_->max_order()) +
                                            " insufficient for mask polynomial degree " +
                                            std::to_string(polys_[k].degree));
        upsilon_.resize(specs_.size() * kOrders * lm_count());
        for (std::size_t k = 0; k < specs_.size(); ++k)
            compute_upsilon(k, specs_[k].center, upsilon_.data() + k * kOrders * lm_count());
    }

    /// Rebuild from cached parts; the Upsilon payload must be mask-major,
    /// then order, then (l, m).
    static MaskBank from_precomputed(std::vector<MaskSpec> specs, std::vector<PolynomialMask> polys,
                                     std::shared_ptr<const MomentCoefficientTable> table,
                                     std::vector<Complex> upsilon) {
        MaskBank bank(std::move(specs), std::move(polys), std::move(table));
        if (upsilon.size() != bank.upsilon_.size())
            throw std::invalid_argument("MaskBank::from_precomputed: Upsilon payload size mismatch");
        bank.upsilon_ = std::move(upsilon);
        return bank;
    }

    const std::vector<Complex>& upsilon_raw() const { return upsilon_; }

    int bandwidth() const { return table_->bandwidth(); }
    std::size_t lm_count() const { return table_->lm_count(); }
    std::size_t size() const { return specs_.size(); }
    const std::vector<MaskSpec>& specs() const { return specs_; }
    const std::vector<PolynomialMask>& polynomials() const { return polys_; }
    const MomentCoefficientTable& table() const { return *table_; }
    std::shared_ptr<const MomentCoefficientTable> table_ptr() const { return table_; }

    /// Upsilon vector of mask k for first-order component `axis` (0=x,1=y,2=z).
    const Complex* upsilon(std::size_t k, int axis) const {
        return upsilon_.data() + (k * kOrders + axis) * lm_count();
    }

    /// Bank with every mask center rotated by R (Upsilon rebuilt).
    MaskBank rotated(const Eigen::Matrix3d& rotation) const {
        MaskBank out(*this);
        for (std::size_t k = 0; k < out.specs_.size(); ++k) {
            out.specs_[k].center = (rotation * specs_[k].center).normalized();
            out.compute_upsilon(k, out.specs_[k].center,
                                out.upsilon_.data() + k * kOrders * lm_count());
        }
        return out;
    }

  private:
    void compute_upsilon(std::size_t k, const Eigen::Vector3d& center, Complex* dst) {
        const std::size_t n = lm_count();
        std::fill(dst, dst + kOrders * n, Complex{0.0, 0.0});
        const auto mono = polys_[k].monomials(center);
        static const MomentOrder first_order[kOrders] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
        for (int axis = 0; axis < kOrders; ++axis) {
            Complex* u = dst + axis * n;
            const MomentOrder& fo = first_order[axis];
            for (const auto& [mo, w] : mono) {
                const MomentOrder shifted{fo.i + mo.i, fo.j + mo.j, fo.k + mo.k};
                const Complex* c = table_->row(shifted);
                // C^{ijk}_{lm} vanishes for l > i+j+k, so only the low-l
                // block of each row contributes.
                const int lmax = std::min(shifted.total(), table_->bandwidth());
                const std::size_t nn = static_cast<std::size_t>(lmax + 1) * (lmax + 1);
                for (std::size_t idx = 0; idx < nn; ++idx) u[idx] += w * c[idx];
            }
        }
    }

    std::vector<MaskSpec> specs_;
    std::vector<PolynomialMask> polys_;
    std::shared_ptr<const MomentCoefficientTable> table_;
    std::vector<Complex> upsilon_; // mask-major, then order, then (l, m)
};

/// Fit every spec and assemble the bank. `fit_tolerance` bounds the
/// recorded residual; pass +inf to accept the best degree-`degree` fit
/// (steep profiles cannot meet 0.02 at low degree).
inline MaskBank build_mask_bank(const std::vector<MaskSpec>& specs, int degree,
                                std::shared_ptr<const MomentCoefficientTable> table,
                                double fit_tolerance = 0.02) {
    std::vector<PolynomialMask> polys;
    polys.reserve(specs.size());
    for (const MaskSpec& s : specs)
        polys.push_back(fit_polynomial_mask(s, degree, fit_tolerance, std::max(degree, 12)));
    return MaskBank(specs, std::move(polys), std::move(table));
}

/// Per-mask first-order masked moments (m_100, m_010, m_001): three complex
/// dot products of length (L+1)^2 per mask, real parts returned.
inline std::vector<Eigen::Vector3d> masked_moments(const ShCoefficients& coeffs, const MaskBank& bank) {
    if (coeffs.bandwidth != bank.bandwidth())
        throw std::invalid_argument("masked_moments: coefficient bandwidth " +
                                    std::to_string(coeffs.bandwidth) + " does not match bank bandwidth " +
                                    std::to_string(bank.bandwidth()));
    const std::size_t n = bank.lm_count();
    std::vector<Eigen::Vector3d> out(bank.size());
    for (std::size_t k = 0; k < bank.size(); ++k) {
        for (int axis = 0; axis < MaskBank::kOrders; ++axis) {
            const Complex* u = bank.upsilon(k, axis);
            double re = 0.0;
            for (std::size_t idx = 0; idx < n; ++idx) {
                const Complex& a = coeffs.coeffs[idx];
                const Complex& b = u[idx];
                re += a.real() * b.real() - a.imag() * b.imag();
            }
            out[k][axis] = re;
        }
    }
    return out;
}

} // namespace fvg
