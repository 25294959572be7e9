#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace fvg {

/// Associated Legendre function P_l^m(x) with the Condon-Shortley phase,
/// i.e. P_1^1(x) = -sqrt(1-x^2). Diagonal seed P_m^m followed by upward
/// recursion in l; stable for l <= 128.
inline double assoc_legendre(int l, int m, double x) {
    if (m < 0 || m > l) throw std::invalid_argument("assoc_legendre: require 0 <= m <= l");
    if (std::abs(x) > 1.0) throw std::invalid_argument("assoc_legendre: require |x| <= 1");

    const double s = std::sqrt((1.0 - x) * (1.0 + x)); // sin(theta) >= 0
    double pmm = 1.0;
    for (int k = 1; k <= m; ++k) pmm *= -(2.0 * k - 1.0) * s;
    if (l == m) return pmm;

    double pm1 = pmm;                       // P_m^m
    double p = (2.0 * m + 1.0) * x * pmm;   // P_{m+1}^m
    for (int ll = m + 2; ll <= l; ++ll) {
        const double pnew = ((2.0 * ll - 1.0) * x * p - (ll + m - 1.0) * pm1) / (ll - m);
        pm1 = p;
        p = pnew;
    }
    return p;
}

/// Fully normalized associated Legendre functions
///   Pbar_l^m(x) = sqrt((2l+1)/(4*pi) * (l-m)!/(l+m)!) * P_l^m(x)
/// for all 0 <= m <= l <= L at a single x, so that
///   Y_lm = Pbar_l^m(cos(theta)) * exp(i*m*phi).
/// The normalized recurrences keep every intermediate O(1), so large L does
/// not hit factorial overflow. Output indexed by l*(l+1)/2 + m.
inline std::vector<double> normalized_legendre_all(int L, double x) {
    if (L < 0) throw std::invalid_argument("normalized_legendre_all: require L >= 0");
    if (std::abs(x) > 1.0) throw std::invalid_argument("normalized_legendre_all: require |x| <= 1");

    std::vector<double> out(static_cast<std::size_t>(L + 1) * (L + 2) / 2);
    const double s = std::sqrt((1.0 - x) * (1.0 + x));
    auto at = [&out](int l, int m) -> double& { return out[static_cast<std::size_t>(l) * (l + 1) / 2 + m]; };

    at(0, 0) = 1.0 / std::sqrt(4.0 * 3.14159265358979323846);
    // diagonal: Pbar_m^m = -sqrt((2m+1)/(2m)) * s * Pbar_{m-1}^{m-1}
    for (int m = 1; m <= L; ++m)
        at(m, m) = -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * at(m - 1, m - 1);
    // first off-diagonal: Pbar_{m+1}^m = sqrt(2m+3) * x * Pbar_m^m
    for (int m = 0; m < L; ++m)
        at(m + 1, m) = std::sqrt(2.0 * m + 3.0) * x * at(m, m);
    // upward in l
    for (int m = 0; m <= L; ++m) {
        for (int l = m + 2; l <= L; ++l) {
            const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - static_cast<double>(m) * m));
            const double b = std::sqrt(((l - 1.0) * (l - 1.0) - static_cast<double>(m) * m) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
            at(l, m) = a * (x * at(l - 1, m) - b * at(l - 2, m));
        }
    }
    return out;
}

} // namespace fvg
