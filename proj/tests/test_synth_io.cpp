#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "fvg/cache_io.hpp"
#include "fvg/dataset.hpp"
#include "fvg/image_io.hpp"
#include "fvg/pipeline.hpp"
#include "fvg/synth.hpp"

using namespace fvg;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("scenes are deterministic and bounded") {
    const SceneFunction a = make_scene(42, 8);
    const SceneFunction b = make_scene(42, 8);
    REQUIRE(a.blobs.size() == 8);
    for (std::size_t i = 0; i < a.blobs.size(); ++i) {
        REQUIRE(a.blobs[i].center == b.blobs[i].center);
        REQUIRE(a.blobs[i].width == b.blobs[i].width);
        REQUIRE(a.blobs[i].amplitude == b.blobs[i].amplitude);
        REQUIRE(a.blobs[i].width >= 0.1);
        REQUIRE(a.blobs[i].width <= 0.5);
        REQUIRE(a.blobs[i].amplitude >= 0.3);
        REQUIRE(a.blobs[i].amplitude <= 1.0);
    }
    const SceneFunction single = make_scene(7, 1);
    REQUIRE(single(single.blobs[0].center) ==
            Catch::Approx(std::min(single.blobs[0].amplitude, 1.0)));
    std::mt19937_64 rng(0);
    std::normal_distribution<double> gauss;
    for (int i = 0; i < 100; ++i) {
        const Eigen::Vector3d s =
            Eigen::Vector3d{gauss(rng), gauss(rng), gauss(rng)}.normalized();
        const double v = a(s);
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
    }
    REQUIRE_THROWS_AS(make_scene(1, 0), std::invalid_argument);
}

TEST_CASE("identity render equals direct scene evaluation") {
    const EquirectGrid g = build_equirect_grid(32, 64);
    const SceneFunction scene = make_scene(3, 5);
    const SphericalImage img = render(scene, Eigen::Matrix3d::Identity(), g);
    for (int r = 0; r < g.height; ++r)
        for (int c = 0; c < g.width; ++c)
            REQUIRE(img.values(r, c) == Catch::Approx(scene(g.direction(r, c))).margin(1e-15));
}

TEST_CASE("rotated render samples the scene at pulled-back directions") {
    const EquirectGrid g = build_equirect_grid(32, 64);
    const SceneFunction scene = make_scene(4, 5);
    const Eigen::Matrix3d R = axis_angle_to_rot(Eigen::Vector3d(0.4, -0.1, 0.8));
    const SphericalImage img = render(scene, R, g);
    for (int r = 0; r < g.height; r += 7)
        for (int c = 0; c < g.width; c += 11)
            REQUIRE(img.values(r, c) ==
                    Catch::Approx(scene(R.transpose() * g.direction(r, c))).margin(1e-15));
}

TEST_CASE("half-sphere render zeroes the back hemisphere exactly") {
    const EquirectGrid g = build_equirect_grid(64, 128);
    const SceneFunction scene = make_scene(6, 8);
    const SphericalImage img = render(scene, Eigen::Matrix3d::Identity(), g, Visibility::Half);
    for (int r = 0; r < g.height; ++r)
        for (int c = 0; c < g.width; ++c) {
            if (std::cos(g.colatitudes[r]) < 0.0) REQUIRE(img.values(r, c) == 0.0);
            else REQUIRE(img.values(r, c) == Catch::Approx(scene(g.direction(r, c))));
        }
}

TEST_CASE("render change of variables preserves the first-order moment vector") {
    const EquirectGrid g = build_equirect_grid(128, 256);
    const SceneFunction scene = make_scene(19, 8);
    const Eigen::Matrix3d R = axis_angle_to_rot(Eigen::Vector3d(-0.2, 0.6, 0.3));
    const std::vector<MomentOrder> first = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    const MomentVector m0 = moments_direct(render(scene, Eigen::Matrix3d::Identity(), g), first);
    const MomentVector m1 = moments_direct(render(scene, R, g), first);
    const Eigen::Vector3d v0{m0.at({1, 0, 0}), m0.at({0, 1, 0}), m0.at({0, 0, 1})};
    const Eigen::Vector3d v1{m1.at({1, 0, 0}), m1.at({0, 1, 0}), m1.at({0, 0, 1})};
    REQUIRE((v1 - R * v0).norm() < 1e-6 * std::max(v0.norm(), 1e-12));
}

TEST_CASE("random rotation sequences are consistent and seeded") {
    const auto seq = random_rotation_sequence(500, 5.0 * kPi / 180.0, 77);
    REQUIRE(seq.rotations.size() == 500);
    REQUIRE(seq.deltas.size() == 500);
    REQUIRE(seq.deltas[0].isIdentity(1e-15));
    for (int i = 1; i < 500; ++i) {
        REQUIRE((seq.deltas[i] * seq.rotations[i - 1] - seq.rotations[i]).norm() < 1e-12);
        REQUIRE(rot_to_axis_angle(seq.deltas[i]).norm() <= 5.0 * kPi / 180.0 + 1e-12);
    }
    const auto again = random_rotation_sequence(500, 5.0 * kPi / 180.0, 77);
    for (int i = 0; i < 500; ++i) REQUIRE(seq.rotations[i] == again.rotations[i]);

    const auto tiny = random_rotation_sequence(50, 0.001 * kPi / 180.0, 5);
    for (const auto& d : tiny.deltas)
        REQUIRE(geodesic_error(d, Eigen::Matrix3d::Identity()) < 2e-5);
}

TEST_CASE("16-bit PGM round trip") {
    const fs::path dir = temp_dir("fvg_pgm_test");
    Eigen::MatrixXd vals(16, 32);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 32; ++c) vals(r, c) = uni(rng);
    const std::string path = (dir / "img.pgm").string();
    write_pgm16(path, vals);
    const LoadedImage back = read_pgm(path);
    REQUIRE(back.values.rows() == 16);
    REQUIRE(back.values.cols() == 32);
    // Quantization error only.
    REQUIRE((back.values - vals).cwiseAbs().maxCoeff() < 1.0 / 65535.0);
    fs::remove_all(dir);
}

TEST_CASE("PGM reader handles comments and rejects junk") {
    const fs::path dir = temp_dir("fvg_pgm_junk");
    {
        std::ofstream out(dir / "ok.pgm", std::ios::binary);
        out << "P5\n# a comment\n2 2\n255\n";
        out.write("\x00\x40\x80\xff", 4);
    }
    const LoadedImage img = read_pgm((dir / "ok.pgm").string());
    REQUIRE(img.values(0, 0) == 0.0);
    REQUIRE(img.values(1, 1) == 1.0);
    {
        std::ofstream out(dir / "bad.pgm", std::ios::binary);
        out << "P6\n2 2\n255\n";
    }
    REQUIRE_THROWS_AS(read_pgm((dir / "bad.pgm").string()), std::runtime_error);
    REQUIRE_THROWS_AS(read_pgm((dir / "missing.pgm").string()), std::runtime_error);
    REQUIRE_THROWS_AS(read_image((dir / "ok.bmp").string()), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("dataset write/load round trip") {
    const fs::path dir = temp_dir("fvg_dataset_test");
    DatasetParams p;
    p.seed = 12;
    p.n_blobs = 4;
    p.height = 32;
    p.width = 64;
    p.frames = 6;
    p.visibility = Visibility::Half;
    const Dataset written = write_dataset(dir.string(), p);
    REQUIRE(written.frame_paths.size() == 6);
    REQUIRE(fs::exists(dir / "manifest.json"));
    REQUIRE(fs::exists(dir / "ground_truth.csv"));

    const Dataset loaded = load_dataset(dir.string());
    REQUIRE(loaded.params.seed == p.seed);
    REQUIRE(loaded.params.visibility == Visibility::Half);
    REQUIRE(loaded.frame_paths == written.frame_paths);
    for (int i = 0; i < p.frames; ++i) {
        REQUIRE((loaded.truth.rotations[i] - written.truth.rotations[i]).norm() == 0.0);
        REQUIRE((loaded.truth.deltas[i] - written.truth.deltas[i]).norm() == 0.0);
    }
    // Stored labels must be self-consistent: delta recovered from stored
    // absolutes matches the stored delta.
    for (int i = 1; i < p.frames; ++i)
        REQUIRE((written.truth.deltas[i] -
                 written.truth.rotations[i] * written.truth.rotations[i - 1].transpose())
                    .norm() < 1e-12);

    // Tampering with the CSV labels must be detected on load.
    {
        std::ifstream in(dir / "ground_truth.csv");
        std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        all.replace(all.find("0.", 20), 2, "9.");
        std::ofstream out(dir / "ground_truth.csv");
        out << all;
    }
    REQUIRE_THROWS_AS(load_dataset(dir.string()), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("coefficient cache round trip is bit-identical and CRC-checked") {
    const fs::path dir = temp_dir("fvg_cache_test");
    const EquirectGrid g = build_equirect_grid(64, 128);
    const ShBasisTable basis(g, 16);
    auto table = std::make_shared<MomentCoefficientTable>(build_coeff_table(16, 13, g, basis));
    const MaskBank bank = build_mask_bank(default_mask_specs(place_mask_centers(12), 0.3), 12,
                                          table, std::numeric_limits<double>::infinity());

    const std::string path = (dir / "cache.fvgc").string();
    cache::write(path, *table, &bank);
    const cache::Loaded loaded = cache::load(path);
    REQUIRE(loaded.table->bandwidth() == 16);
    REQUIRE(loaded.table->max_order() == 13);
    REQUIRE(loaded.table->raw() == table->raw());
    REQUIRE(loaded.bank.has_value());
    REQUIRE(loaded.bank->size() == 12);
    REQUIRE(loaded.bank->upsilon_raw() == bank.upsilon_raw());
    for (std::size_t k = 0; k < bank.size(); ++k) {
        REQUIRE(loaded.bank->specs()[k].center == bank.specs()[k].center);
        REQUIRE(loaded.bank->polynomials()[k].coeffs == bank.polynomials()[k].coeffs);
    }

    // Re-writing produces identical bytes.
    const std::string path2 = (dir / "cache2.fvgc").string();
    cache::write(path2, *table, &bank);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    REQUIRE(b1 == b2);

    // Flip one payload byte: the CRC check must fire.
    std::string corrupted = b1;
    corrupted[64] = static_cast<char>(corrupted[64] ^ 0x01);
    {
        std::ofstream out(dir / "bad.fvgc", std::ios::binary);
        out.write(corrupted.data(), static_cast<std::streamsize>(corrupted.size()));
    }
    REQUIRE_THROWS_AS(cache::load((dir / "bad.fvgc").string()), std::runtime_error);

    // Table-only cache loads without a bank.
    const std::string path3 = (dir / "table_only.fvgc").string();
    cache::write(path3, *table);
    REQUIRE_FALSE(cache::load(path3).bank.has_value());
    fs::remove_all(dir);
}

TEST_CASE("trajectory CSV and SVG writers produce well-formed files") {
    const fs::path dir = temp_dir("fvg_plot_test");
    std::vector<TrajectoryRow> rows;
    for (int i = 0; i < 5; ++i)
        rows.push_back({i, Eigen::Vector3d(0.1 * i, 0, 0), Eigen::Vector3d(0.1 * i, 0, 1e-3),
                        1e-3, 1e-4});
    const std::string csv = (dir / "traj.csv").string();
    write_trajectory_csv(csv, rows);
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    REQUIRE(header ==
            "frame_index,gt_ax,gt_ay,gt_az,est_ax,est_ay,est_az,geodesic_error_rad,residual");
    int count = 0;
    for (std::string line; std::getline(in, line);) ++count;
    REQUIRE(count == 5);

    const std::string svg = (dir / "plot.svg").string();
    write_svg_lines(svg, "demo", {0.1, 0.2, 0.3}, {{"a", {1.0, 2.0, 1.5}}, {"b", {0.5, 0.4, 0.9}}});
    std::ifstream sf(svg);
    const std::string body((std::istreambuf_iterator<char>(sf)), std::istreambuf_iterator<char>());
    REQUIRE(body.find("<svg") != std::string::npos);
    REQUIRE(body.rfind("</svg>") != std::string::npos);
    REQUIRE(body.find("polyline") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("parallel_for covers every index once and propagates exceptions") {
    std::vector<int> hits(1000, 0);
    parallel_for(1000, 8, [&](int i) { hits[i] += 1; });
    for (int h : hits) REQUIRE(h == 1);
    REQUIRE_THROWS_AS(parallel_for(100, 4,
                                   [&](int i) {
                                       if (i == 57) throw std::runtime_error("boom");
                                   }),
                      std::runtime_error);
}
