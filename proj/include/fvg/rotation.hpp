#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "fvg/mask.hpp"
#include "fvg/sh_transform.hpp"

namespace fvg {

struct DegenerateCloud : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One 3D point per mask: the first-order masked moments (m_100, m_010,
/// m_001), in fixed bank order.
struct TripletCloud {
    std::vector<Eigen::Vector3d> points;
    int filter_cutoff = -1; // low-pass cutoff L_c used to produce the coefficients, -1 = none
};

struct RotationEstimate {
    Eigen::Matrix3d matrix = Eigen::Matrix3d::Identity();
    Eigen::Vector3d axis_angle = Eigen::Vector3d::Zero();
    double residual = 0.0; // weighted RMS Kabsch alignment error
};

inline TripletCloud triplet_cloud(const ShCoefficients& coeffs, const MaskBank& bank) {
    return TripletCloud{masked_moments(coeffs, bank), -1};
}

/// Rodrigues: rotation vector theta * u_hat to matrix.
inline Eigen::Matrix3d axis_angle_to_rot(const Eigen::Vector3d& v) {
    if (!v.allFinite()) throw std::invalid_argument("axis_angle_to_rot: non-finite rotation vector");
    const double theta = v.norm();
    if (theta < 1e-14) return Eigen::Matrix3d::Identity();
    const Eigen::Vector3d u = v / theta;
    Eigen::Matrix3d K;
    K << 0, -u.z(), u.y(), u.z(), 0, -u.x(), -u.y(), u.x(), 0;
    return Eigen::Matrix3d::Identity() + std::sin(theta) * K + (1.0 - std::cos(theta)) * K * K;
}

/// Matrix to rotation vector, stable near both theta = 0 and theta = pi.
inline Eigen::Vector3d rot_to_axis_angle(const Eigen::Matrix3d& R) {
    if ((R.transpose() * R - Eigen::Matrix3d::Identity()).norm() > 1e-8 || R.determinant() < 0.0)
        throw std::invalid_argument("rot_to_axis_angle: input is not a rotation matrix");
    // Quaternion extraction (Eigen picks the numerically dominant component)
    // stays fully accurate near both 0 and pi, unlike the trace/skew route.
    Eigen::Quaterniond q(R);
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    const double n = q.vec().norm();
    const double theta = 2.0 * std::atan2(n, q.w());
    if (n < 1e-9) return 2.0 * q.vec(); // sin(theta/2) ~ theta/2
    return (theta / n) * q.vec();
}

/// Nearest rotation matrix in the Frobenius sense (polar factor).
inline Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& M) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d R = svd.matrixU() * svd.matrixV().transpose();
    if (R.determinant() < 0.0) {
        Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
        D(2, 2) = -1.0;
        R = svd.matrixU() * D * svd.matrixV().transpose();
    }
    return R;
}

/// Weighted Procrustes: the rotation minimizing sum_k w_k |R p_k - q_k|^2
/// with w_k = |p_k| |q_k| (normalized), which down-weights masks whose
/// support carries little image energy. det = +1 is enforced by flipping
/// the smallest singular direction.
inline RotationEstimate kabsch(const TripletCloud& reference, const TripletCloud& current) {
    const std::size_t n = reference.points.size();
    if (n != current.points.size())
        throw std::invalid_argument("kabsch: cloud length mismatch (" + std::to_string(n) + " vs " +
                                    std::to_string(current.points.size()) + ")");
    if (n < 3) throw std::invalid_argument("kabsch: need at least 3 points");

    double wsum = 0.0;
    std::vector<double> w(n);
    for (std::size_t k = 0; k < n; ++k) {
        w[k] = reference.points[k].norm() * current.points[k].norm();
        wsum += w[k];
    }
    if (wsum <= 0.0) throw DegenerateCloud("kabsch: all triplets are zero");

    Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
    for (std::size_t k = 0; k < n; ++k)
        H += (w[k] / wsum) * reference.points[k] * current.points[k].transpose();

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d sv = svd.singularValues();
    if (sv(1) <= 1e-12 * std::max(sv(0), 1e-300))
        throw DegenerateCloud("kabsch: rank-deficient cross-covariance (collinear cloud)");

    const double d = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
    D(2, 2) = d;
    RotationEstimate est;
    est.matrix = svd.matrixV() * D * svd.matrixU().transpose();
    est.axis_angle = rot_to_axis_angle(est.matrix);
    double err = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        err += (w[k] / wsum) * (est.matrix * reference.points[k] - current.points[k]).squaredNorm();
    est.residual = std::sqrt(err);
    return est;
}

/// Angle of the relative rotation between two orientations, in radians.
inline double geodesic_error(const Eigen::Matrix3d& Ra, const Eigen::Matrix3d& Rb) {
    const Eigen::Matrix3d D = Ra.transpose() * Rb;
    const double c = (D.trace() - 1.0) / 2.0;
    // atan2 of the skew part keeps full precision for small angles, where
    // acos((tr-1)/2) bottoms out around sqrt(eps).
    const Eigen::Vector3d v{D(2, 1) - D(1, 2), D(0, 2) - D(2, 0), D(1, 0) - D(0, 1)};
    return std::atan2(0.5 * v.norm(), std::clamp(c, -1.0, 1.0));
}

struct EstimateOptions {
    /// Fixed-point refinement rounds with mask centers co-rotated by the
    /// running estimate. 0 reproduces the single-shot Kabsch estimate.
    int refine_iterations = 7;
    /// Aitken extrapolation of the geometrically decaying update sequence.
    bool accelerate = true;
    double step_tolerance = 1e-12; // stop once the update angle drops below this
};

/// Analytical relative rotation between two coefficient sets. The initial
/// estimate aligns the two triplet clouds of the fixed bank; refinement
/// rounds recompute the current cloud with mask centers rotated by the
/// running estimate, whose fixed point is consistent with the true rotation
/// because co-rotated masks make the clouds exactly equivariant.
inline RotationEstimate estimate_relative(const ShCoefficients& ref_coeffs,
                                          const ShCoefficients& cur_coeffs, const MaskBank& bank,
                                          const EstimateOptions& opts = {}) {
    const TripletCloud ref_cloud = triplet_cloud(ref_coeffs, bank);
    RotationEstimate est = kabsch(ref_cloud, triplet_cloud(cur_coeffs, bank));

    double prev_step = -1.0;
    for (int it = 0; it < opts.refine_iterations; ++it) {
        const MaskBank rotated = bank.rotated(est.matrix);
        RotationEstimate next = kabsch(ref_cloud, triplet_cloud(cur_coeffs, rotated));
        Eigen::Vector3d d = rot_to_axis_angle(est.matrix.transpose() * next.matrix);
        const double step = d.norm();
        if (opts.accelerate && prev_step > 0.0) {
            const double lambda = step / prev_step;
            if (lambda > 0.05 && lambda < 0.95) {
                next.matrix = next.matrix * axis_angle_to_rot(d * (lambda / (1.0 - lambda)));
                next.axis_angle = rot_to_axis_angle(next.matrix);
                prev_step = -1.0; // restart the ratio after extrapolating
            } else {
                prev_step = step;
            }
        } else {
            prev_step = step;
        }
        est = next;
        if (step < opts.step_tolerance) break;
    }
    return est;
}

/// Compose per-step deltas into absolute rotations: R_n = dR_n * R_{n-1},
/// starting from the identity, re-orthonormalized at every step.
inline std::vector<Eigen::Matrix3d> accumulate(const std::vector<RotationEstimate>& deltas) {
    std::vector<Eigen::Matrix3d> out;
    out.reserve(deltas.size());
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    for (const RotationEstimate& d : deltas) {
        R = nearest_rotation(d.matrix * R);
        out.push_back(R);
    }
    return out;
}

} // namespace fvg
