#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fvg/image_io.hpp"
#include "fvg/synth.hpp"

namespace fvg {

/// Everything needed to regenerate a dataset byte-for-byte: the scene and
/// trajectory are rebuilt from the seeds, the frames re-rendered on the
/// same grid.
struct DatasetParams {
    std::uint64_t seed = 0;
    int n_blobs = 16;
    int height = 128;
    int width = 256;
    int frames = 500;
    double max_step_rad = 5.0 * kPi / 180.0;
    Visibility visibility = Visibility::Whole;
};

struct Dataset {
    DatasetParams params;
    GroundTruthSequence truth;
    std::vector<std::string> frame_paths; // one 16-bit PGM per frame, in order
};

namespace detail {

inline std::string frame_name(int index) {
    std::ostringstream os;
    os << "frame_" << std::setw(5) << std::setfill('0') << index << ".pgm";
    return os.str();
}

inline std::string vis_name(Visibility v) { return v == Visibility::Half ? "half" : "whole"; }

inline Visibility vis_from_name(const std::string& s) {
    if (s == "half") return Visibility::Half;
    if (s == "whole") return Visibility::Whole;
    throw std::runtime_error("dataset: unknown visibility '" + s + "'");
}

inline void write_axis_angle(std::ostream& os, const Eigen::Vector3d& v) {
    os << std::setprecision(17) << v.x() << "," << v.y() << "," << v.z();
}

} // namespace detail

/// Generate and write a dataset directory: 16-bit PGM frames,
/// `manifest.json`, and `ground_truth.csv` (frame index, absolute and
/// per-step axis-angles).
inline Dataset write_dataset(const std::string& dir, const DatasetParams& params) {
    if (params.frames < 1) throw std::invalid_argument("write_dataset: frames must be >= 1");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("write_dataset: cannot create directory " + dir + ": " + ec.message());

    Dataset ds;
    ds.params = params;
    const EquirectGrid grid = build_equirect_grid(params.height, params.width);
    const SceneFunction scene = make_scene(params.seed, params.n_blobs);
    ds.truth = random_rotation_sequence(params.frames, params.max_step_rad, params.seed + 1,
                                        params.visibility);

    for (int i = 0; i < params.frames; ++i) {
        const std::string path = (fs::path(dir) / detail::frame_name(i)).string();
        const SphericalImage img = render(scene, ds.truth.rotations[i], grid, params.visibility);
        write_pgm16(path, img.values);
        ds.frame_paths.push_back(path);
    }

    nlohmann::json manifest;
    manifest["format_version"] = 1;
    manifest["seed"] = params.seed;
    manifest["n_blobs"] = params.n_blobs;
    manifest["grid"] = {{"height", params.height}, {"width", params.width}};
    manifest["visibility"] = detail::vis_name(params.visibility);
    manifest["frames"] = params.frames;
    manifest["max_step_rad"] = params.max_step_rad;
    {
        std::ofstream out((fs::path(dir) / "manifest.json").string());
        if (!out) throw std::runtime_error("write_dataset: cannot write manifest.json in " + dir);
        out << manifest.dump(2) << "\n";
    }

    std::ofstream csv((fs::path(dir) / "ground_truth.csv").string());
    if (!csv) throw std::runtime_error("write_dataset: cannot write ground_truth.csv in " + dir);
    csv << "frame,abs_ax,abs_ay,abs_az,delta_ax,delta_ay,delta_az\n";
    for (int i = 0; i < params.frames; ++i) {
        csv << i << ",";
        detail::write_axis_angle(csv, rot_to_axis_angle(ds.truth.rotations[i]));
        csv << ",";
        detail::write_axis_angle(csv, rot_to_axis_angle(ds.truth.deltas[i]));
        csv << "\n";
    }
    if (!csv) throw std::runtime_error("write_dataset: write failed for ground_truth.csv in " + dir);
    return ds;
}

/// Load a dataset directory written by write_dataset. Ground truth is
/// rebuilt from the manifest seeds (and cross-checked against the CSV);
/// frame pixels are left on disk.
inline Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("load_dataset: cannot open " + manifest_path);
    nlohmann::json manifest;
    in >> manifest;

    Dataset ds;
    ds.params.seed = manifest.at("seed").get<std::uint64_t>();
    ds.params.n_blobs = manifest.at("n_blobs").get<int>();
    ds.params.height = manifest.at("grid").at("height").get<int>();
    ds.params.width = manifest.at("grid").at("width").get<int>();
    ds.params.frames = manifest.at("frames").get<int>();
    ds.params.max_step_rad = manifest.at("max_step_rad").get<double>();
    ds.params.visibility = detail::vis_from_name(manifest.at("visibility").get<std::string>());

    ds.truth = random_rotation_sequence(ds.params.frames, ds.params.max_step_rad, ds.params.seed + 1,
                                        ds.params.visibility);
    for (int i = 0; i < ds.params.frames; ++i) {
        const std::string path = (fs::path(dir) / detail::frame_name(i)).string();
        if (!fs::exists(path)) throw std::runtime_error("load_dataset: missing frame " + path);
        ds.frame_paths.push_back(path);
    }

    // Cross-check the stored labels against the regenerated trajectory.
    const std::string csv_path = (fs::path(dir) / "ground_truth.csv").string();
    std::ifstream csv(csv_path);
    if (!csv) throw std::runtime_error("load_dataset: cannot open " + csv_path);
    std::string line;
    std::getline(csv, line); // header
    for (int i = 0; i < ds.params.frames; ++i) {
        if (!std::getline(csv, line))
            throw std::runtime_error("load_dataset: ground_truth.csv truncated at frame " +
                                     std::to_string(i));
        std::istringstream ls(line);
        std::string tok;
        double v[7];
        for (double& x : v) {
            if (!std::getline(ls, tok, ',')) throw std::runtime_error("load_dataset: bad CSV row " + line);
            x = std::stod(tok);
        }
        const Eigen::Vector3d abs_aa{v[1], v[2], v[3]};
        if ((axis_angle_to_rot(abs_aa) - ds.truth.rotations[i]).norm() > 1e-9)
            throw std::runtime_error("load_dataset: ground_truth.csv disagrees with manifest seed at frame " +
                                     std::to_string(i));
    }
    return ds;
}

} // namespace fvg
