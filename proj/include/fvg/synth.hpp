#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "fvg/grid.hpp"
#include "fvg/rotation.hpp"

namespace fvg {

enum class Visibility { Whole, Half };

/// Analytic spherical scene: a sum of Gaussian blobs in angular distance,
/// clipped to [0, 1]. Evaluable at any direction, so rotated renderings are
/// exact (no interpolation error) and ground truth is exact.
struct SceneFunction {
    struct Blob {
        Eigen::Vector3d center;
        double width;     // angular width, radians
        double amplitude;
    };
    std::uint64_t seed = 0;
    std::vector<Blob> blobs;

    double operator()(const Eigen::Vector3d& s) const {
        double acc = 0.0;
        for (const Blob& b : blobs) {
            const double ang = std::acos(std::clamp(s.dot(b.center), -1.0, 1.0));
            acc += b.amplitude * std::exp(-(ang / b.width) * (ang / b.width));
        }
        return std::clamp(acc, 0.0, 1.0);
    }
};

inline SceneFunction make_scene(std::uint64_t seed, int n_blobs) {
    if (n_blobs < 1) throw std::invalid_argument("make_scene: n_blobs must be >= 1");
    SceneFunction scene;
    scene.seed = seed;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> width(0.1, 0.5);
    std::uniform_real_distribution<double> amp(0.3, 1.0);
    for (int b = 0; b < n_blobs; ++b) {
        Eigen::Vector3d c{gauss(rng), gauss(rng), gauss(rng)};
        while (c.norm() < 1e-6) c = {gauss(rng), gauss(rng), gauss(rng)};
        scene.blobs.push_back({c.normalized(), width(rng), amp(rng)});
    }
    return scene;
}

/// Render the scene seen from orientation R: I(s) = f(R^T s), evaluated
/// analytically per cell. Half-sphere visibility zeroes the back
/// hemisphere (s_z < 0) in the camera frame.
inline SphericalImage render(const SceneFunction& scene, const Eigen::Matrix3d& rotation,
                             const EquirectGrid& grid, Visibility visibility = Visibility::Whole) {
    Eigen::MatrixXd vals(grid.height, grid.width);
    const Eigen::Matrix3d Rt = rotation.transpose();
    for (int r = 0; r < grid.height; ++r) {
        const double st = std::sin(grid.colatitudes[r]);
        const double ct = std::cos(grid.colatitudes[r]);
        const bool visible_row = visibility == Visibility::Whole || ct >= 0.0;
        for (int c = 0; c < grid.width; ++c) {
            if (!visible_row) {
                vals(r, c) = 0.0;
                continue;
            }
            const Eigen::Vector3d s{st * std::cos(grid.azimuths[c]), st * std::sin(grid.azimuths[c]), ct};
            vals(r, c) = scene(Rt * s);
        }
    }
    return SphericalImage(grid, std::move(vals));
}

/// Ground-truth rotations of a pure-rotation sequence: absolutes R_n and
/// per-step deltas dR_n = R_n * R_{n-1}^T, mutually consistent by
/// construction. dR_0 is the identity.
struct GroundTruthSequence {
    std::vector<Eigen::Matrix3d> rotations;
    std::vector<Eigen::Matrix3d> deltas;
    Visibility visibility = Visibility::Whole;
};

inline GroundTruthSequence random_rotation_sequence(int n, double max_step_rad, std::uint64_t seed,
                                                    Visibility visibility = Visibility::Whole) {
    if (n < 1) throw std::invalid_argument("random_rotation_sequence: n must be >= 1");
    if (max_step_rad <= 0.0) throw std::invalid_argument("random_rotation_sequence: max_step must be > 0");
    GroundTruthSequence seq;
    seq.visibility = visibility;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> angle(0.0, max_step_rad);
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    seq.rotations.push_back(R);
    seq.deltas.push_back(Eigen::Matrix3d::Identity());
    for (int i = 1; i < n; ++i) {
        Eigen::Vector3d axis{gauss(rng), gauss(rng), gauss(rng)};
        while (axis.norm() < 1e-6) axis = {gauss(rng), gauss(rng), gauss(rng)};
        const Eigen::Matrix3d dR = axis_angle_to_rot(axis.normalized() * angle(rng));
        R = dR * R;
        seq.deltas.push_back(dR);
        seq.rotations.push_back(R);
    }
    return seq;
}

} // namespace fvg
