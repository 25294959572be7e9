// Command-line surface for the fast visual gyroscope: precompute caches,
// generate synthetic datasets, estimate rotations over sequences,
// train/evaluate the MLP refiner, and benchmark the pipeline stages.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fvg/fvg.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Options {
    int bandwidth = 32;
    std::string grid = "128x256";
    int masks = 100;
    std::vector<double> ranges = {0.1, 0.2, 0.3, 0.4, 0.5};
    std::vector<int> cutoffs = {16, 32};
    bool half_sphere = false;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out_dir = "out";
    std::string cache_path;
    std::string model_path;
    std::string data_dir;

    // gen-data extras
    int frames = 500;
    int blobs = 16;
    double max_step_deg = 5.0;

    // train extras
    double test_fraction = 0.30;
    int epochs = 200;

    int grid_height = 0, grid_width = 0;

    void finish() {
        const auto x = grid.find('x');
        if (x == std::string::npos) throw CLI::ValidationError("--grid", "expected HxW, e.g. 128x256");
        try {
            grid_height = std::stoi(grid.substr(0, x));
            grid_width = std::stoi(grid.substr(x + 1));
        } catch (const std::exception&) {
            throw CLI::ValidationError("--grid", "expected HxW, e.g. 128x256");
        }
        if (cache_path.empty()) {
            const char* env = std::getenv("FVG_CACHE_DIR");
            const fs::path dir = env ? env : ".";
            std::ostringstream name;
            name << "fvg_L" << bandwidth << "_M" << masks << "_" << grid_height << "x" << grid_width
                 << ".fvgc";
            cache_path = (dir / name.str()).string();
        }
    }

    nlohmann::json echo() const {
        return {{"bandwidth", bandwidth},
                {"grid", grid},
                {"masks", masks},
                {"ranges", ranges},
                {"cutoffs", cutoffs},
                {"half_sphere", half_sphere},
                {"seed", seed},
                {"threads", threads},
                {"out", out_dir},
                {"cache", cache_path},
                {"model", model_path},
                {"data", data_dir},
                {"frames", frames},
                {"blobs", blobs},
                {"max_step_deg", max_step_deg},
                {"test_fraction", test_fraction},
                {"epochs", epochs}};
    }
};

void add_shared_flags(CLI::App* sub, Options& o) {
    sub->add_option("--bandwidth", o.bandwidth, "SH bandwidth L");
    sub->add_option("--grid", o.grid, "grid dimensions HxW");
    sub->add_option("--masks", o.masks, "number of masks in the bank");
    sub->add_option("--ranges", o.ranges, "mask range sweep values r")->delimiter(',');
    sub->add_option("--cutoffs", o.cutoffs, "low-pass cutoffs L_c")->delimiter(',');
    sub->add_flag("--half-sphere", o.half_sphere, "half-sphere visibility");
    sub->add_option("--seed", o.seed, "rng seed");
    sub->add_option("--threads", o.threads, "worker threads for frame-parallel stages");
    sub->add_option("--out-dir,--out", o.out_dir, "output directory");
    sub->add_option("--cache", o.cache_path, "coefficient cache file (default: $FVG_CACHE_DIR)");
    sub->add_option("--model", o.model_path, "refiner model JSON file");
    sub->add_option("--data", o.data_dir, "dataset directory");
}

void write_manifest(const Options& o, const std::string& command) {
    fs::create_directories(o.out_dir);
    nlohmann::json m = o.echo();
    m["command"] = command;
    std::ofstream out(fs::path(o.out_dir) / "manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest in " + o.out_dir);
    out << m.dump(2) << "\n";
}

fvg::FeatureLayout make_layout(const Options& o, const std::vector<double>& ranges) {
    fvg::FeatureLayout layout;
    for (int c : o.cutoffs)
        for (double r : ranges) layout.groups.push_back({c, r});
    return layout;
}

/// Load the cache (table + stored bank) and rebuild banks for every
/// requested range from the cached table.
fvg::PipelineContext load_context(const Options& o) {
    if (!fs::exists(o.cache_path))
        throw std::runtime_error("cache file " + o.cache_path +
                                 " not found; run `fvg precompute` first");
    // Reuse the cached C table; banks not present in the cache are rebuilt
    // from it (cheap next to the table build).
    fvg::cache::Loaded loaded = fvg::cache::load(o.cache_path);
    if (loaded.table->bandwidth() != o.bandwidth || loaded.table->grid_height() != o.grid_height ||
        loaded.table->grid_width() != o.grid_width)
        throw std::runtime_error("cache " + o.cache_path + " was built for L=" +
                                 std::to_string(loaded.table->bandwidth()) + ", grid " +
                                 std::to_string(loaded.table->grid_height()) + "x" +
                                 std::to_string(loaded.table->grid_width()) +
                                 "; rerun precompute for the requested configuration");
    fvg::PipelineContext ctx(loaded.table, o.masks, {});
    if (loaded.bank && !loaded.bank->specs().empty() &&
        loaded.bank->size() == static_cast<std::size_t>(o.masks))
        ctx.banks.emplace(loaded.bank->specs()[0].r, *loaded.bank);
    ctx.add_banks(o.masks, o.ranges);
    return ctx;
}

std::vector<fvg::ShCoefficients> transform_frames(const fvg::Dataset& ds,
                                                  const fvg::PipelineContext& ctx, int threads) {
    std::vector<fvg::ShCoefficients> coeffs(ds.frame_paths.size());
    fvg::parallel_for(static_cast<int>(ds.frame_paths.size()), threads, [&](int i) {
        const fvg::LoadedImage img = fvg::read_pgm(ds.frame_paths[i]);
        coeffs[i] = fvg::sh_forward(img.on_grid(ctx.grid()), ctx.basis());
    });
    return coeffs;
}

std::string config_tag(const fvg::FeatureGroup& g) {
    std::ostringstream os;
    os << "L" << g.filter_cutoff << "_r" << g.mask_range;
    return os.str();
}

int cmd_precompute(Options& o) {
    const auto t0 = Clock::now();
    fvg::PipelineContext ctx(o.bandwidth, o.grid_height, o.grid_width, o.masks, {o.ranges.front()});
    const fvg::MaskBank& bank = ctx.banks.begin()->second;
    fs::create_directories(fs::path(o.cache_path).parent_path().empty()
                               ? "."
                               : fs::path(o.cache_path).parent_path().string());
    fvg::cache::write(o.cache_path, *ctx.table, &bank);
    std::cout << "wrote " << o.cache_path << " (" << fs::file_size(o.cache_path) << " bytes)\n"
              << "C table: " << ctx.table->raw().size() << " entries (L=" << o.bandwidth
              << ", max_order=" << ctx.table->max_order() << ")\n"
              << "bank: " << bank.size() << " masks at r=" << o.ranges.front() << "\n"
              << "build time: " << ms_since(t0) << " ms\n";
    return 0;
}

int cmd_gen_data(Options& o) {
    fvg::DatasetParams p;
    p.seed = o.seed;
    p.n_blobs = o.blobs;
    p.height = o.grid_height;
    p.width = o.grid_width;
    p.frames = o.frames;
    p.max_step_rad = o.max_step_deg * fvg::kPi / 180.0;
    p.visibility = o.half_sphere ? fvg::Visibility::Half : fvg::Visibility::Whole;
    const auto t0 = Clock::now();
    fvg::write_dataset(o.out_dir, p);
    std::cout << "wrote " << o.frames << " frames to " << o.out_dir << " in " << ms_since(t0)
              << " ms\n";
    return 0;
}

int cmd_estimate(Options& o) {
    if (o.data_dir.empty()) throw std::runtime_error("estimate: --data is required");
    fvg::PipelineContext ctx = load_context(o);
    const fvg::Dataset ds = fvg::load_dataset(o.data_dir);
    write_manifest(o, "estimate");
    const auto coeffs = transform_frames(ds, ctx, o.threads);
    const int n = static_cast<int>(coeffs.size());

    const fvg::FeatureLayout layout = make_layout(o, o.ranges);
    for (const fvg::FeatureGroup& g : layout.groups) {
        std::vector<fvg::RotationEstimate> deltas(n);
        deltas[0] = {}; // identity for frame 0
        std::vector<double> mask_ms(n, 0.0);
        fvg::parallel_for(n - 1, o.threads, [&](int i) {
            const auto t0 = Clock::now();
            const auto ref = coeffs[i].low_pass(g.filter_cutoff);
            const auto cur = coeffs[i + 1].low_pass(g.filter_cutoff);
            deltas[i + 1] = fvg::estimate_relative(ref, cur, ctx.banks.at(g.mask_range));
            mask_ms[i + 1] = ms_since(t0);
        });

        const auto accumulated = fvg::accumulate(
            std::vector<fvg::RotationEstimate>(deltas.begin() + 1, deltas.end()));

        std::vector<fvg::TrajectoryRow> delta_rows, abs_rows;
        abs_rows.push_back({0, fvg::rot_to_axis_angle(ds.truth.rotations[0]),
                            Eigen::Vector3d::Zero(), 0.0, 0.0});
        for (int i = 1; i < n; ++i) {
            delta_rows.push_back({i, fvg::rot_to_axis_angle(ds.truth.deltas[i]),
                                  deltas[i].axis_angle,
                                  fvg::geodesic_error(ds.truth.deltas[i], deltas[i].matrix),
                                  deltas[i].residual});
            abs_rows.push_back({i, fvg::rot_to_axis_angle(ds.truth.rotations[i]),
                                fvg::rot_to_axis_angle(accumulated[i - 1]),
                                fvg::geodesic_error(ds.truth.rotations[i], accumulated[i - 1]),
                                deltas[i].residual});
        }
        const std::string tag = config_tag(g);
        fvg::write_trajectory_csv((fs::path(o.out_dir) / ("delta_" + tag + ".csv")).string(),
                                  delta_rows);
        fvg::write_trajectory_csv((fs::path(o.out_dir) / ("abs_" + tag + ".csv")).string(), abs_rows);

        double mean_err = 0.0;
        for (const auto& r : delta_rows) mean_err += r.geodesic_error_rad;
        mean_err /= std::max<std::size_t>(delta_rows.size(), 1);
        std::sort(mask_ms.begin() + 1, mask_ms.end());
        std::cout << tag << ": mean delta error " << mean_err * 180.0 / fvg::kPi
                  << " deg, median per-pair estimate time " << mask_ms[1 + (n - 1) / 2] << " ms\n";
    }
    return 0;
}

/// Features + targets for every adjacent pair of the dataset, plus the
/// per-config analytical errors (for comparisons).
struct PairTable {
    fvg::FeatureLayout layout;
    std::vector<std::vector<std::pair<fvg::FeatureGroup, fvg::RotationEstimate>>> estimates;
    fvg::LbtoDataset samples; // features + ground-truth delta axis-angle
};

PairTable build_pair_table(const Options& o, const fvg::PipelineContext& ctx, const fvg::Dataset& ds,
                           const std::vector<double>& ranges) {
    const auto coeffs = transform_frames(ds, ctx, o.threads);
    PairTable table;
    table.layout = make_layout(o, ranges);
    const int pairs = static_cast<int>(coeffs.size()) - 1;
    table.estimates.resize(pairs);
    table.samples.resize(pairs);
    fvg::parallel_for(pairs, o.threads, [&](int i) {
        table.estimates[i] = fvg::estimate_all_configs(coeffs[i], coeffs[i + 1], ctx, table.layout);
        table.samples[i].features = fvg::feature_vector(table.layout, table.estimates[i]);
        table.samples[i].target = fvg::rot_to_axis_angle(ds.truth.deltas[i + 1]);
    });
    return table;
}

std::vector<double> default_feature_ranges(const Options& o) {
    // Feature groups use a sparse range subset; the full --ranges sweep is
    // for the estimate/eval curves.
    std::vector<double> rs;
    for (double r : {0.1, 0.3, 0.5})
        if (std::find(o.ranges.begin(), o.ranges.end(), r) != o.ranges.end()) rs.push_back(r);
    if (rs.empty()) rs = o.ranges;
    return rs;
}

int cmd_train(Options& o) {
    if (o.data_dir.empty()) throw std::runtime_error("train: --data is required");
    if (o.model_path.empty()) throw std::runtime_error("train: --model is required");
    fvg::PipelineContext ctx = load_context(o);
    const fvg::Dataset ds = fvg::load_dataset(o.data_dir);
    write_manifest(o, "train");

    const PairTable table = build_pair_table(o, ctx, ds, default_feature_ranges(o));
    auto [train_set, test_set] = fvg::split_dataset(table.samples, o.test_fraction, o.seed);

    fvg::LbtoModel model(table.layout);
    fvg::TrainConfig cfg;
    cfg.seed = o.seed;
    cfg.epochs = o.epochs;
    const auto t0 = Clock::now();
    const fvg::TrainHistory hist = fvg::train(model, train_set, test_set, cfg);
    fvg::save_model(o.model_path, model);

    std::ofstream loss((fs::path(o.out_dir) / "training_loss.csv").string());
    loss << "epoch,train_mse,val_mse,learning_rate\n" << std::setprecision(17);
    for (std::size_t e = 0; e < hist.train_loss.size(); ++e)
        loss << e << "," << hist.train_loss[e] << "," << hist.val_loss[e] << ","
             << hist.learning_rate[e] << "\n";

    std::cout << "trained on " << train_set.size() << " pairs, held out " << test_set.size() << " ("
              << ms_since(t0) << " ms)\n"
              << "final train MSE " << model.final_train_mse() << ", val MSE " << model.final_val_mse()
              << "\nwrote " << o.model_path << "\n";
    return 0;
}

int cmd_eval(Options& o) {
    if (o.data_dir.empty()) throw std::runtime_error("eval: --data is required");
    if (o.model_path.empty()) throw std::runtime_error("eval: --model is required");
    fvg::PipelineContext ctx = load_context(o);
    const fvg::Dataset ds = fvg::load_dataset(o.data_dir);
    const fvg::LbtoModel model = fvg::load_model(o.model_path);
    write_manifest(o, "eval");

    std::vector<double> feature_ranges;
    for (const auto& g : model.layout().groups)
        if (std::find(feature_ranges.begin(), feature_ranges.end(), g.mask_range) ==
            feature_ranges.end())
            feature_ranges.push_back(g.mask_range);
    for (double r : feature_ranges)
        if (ctx.banks.find(r) == ctx.banks.end())
            throw std::runtime_error("eval: model needs mask range " + std::to_string(r) +
                                     "; add it to --ranges");

    Options feature_opts = o;
    feature_opts.cutoffs.clear();
    for (const auto& g : model.layout().groups)
        if (std::find(feature_opts.cutoffs.begin(), feature_opts.cutoffs.end(), g.filter_cutoff) ==
            feature_opts.cutoffs.end())
            feature_opts.cutoffs.push_back(g.filter_cutoff);
    const PairTable table = build_pair_table(feature_opts, ctx, ds, feature_ranges);
    if (!(table.layout.groups == model.layout().groups))
        throw std::runtime_error("eval: dataset feature layout does not match the model layout");

    // Held-out split must match training: same fraction and seed.
    std::vector<std::size_t> idx(table.samples.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(o.seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n_test = static_cast<std::size_t>(std::lround(idx.size() * o.test_fraction));

    // Per-config analytical errors plus the refined error, per test pair.
    const std::size_t n_groups = table.layout.groups.size();
    std::ofstream cmp((fs::path(o.out_dir) / "eval_pairs.csv").string());
    cmp << "pair_index";
    for (const auto& g : table.layout.groups) cmp << ",analytical_" << config_tag(g) << "_err_rad";
    cmp << ",lbto_err_rad\n" << std::setprecision(17);

    std::vector<double> analytic_sum(n_groups, 0.0);
    double lbto_sum = 0.0;
    std::vector<std::size_t> test_idx(idx.begin(), idx.begin() + n_test);
    std::sort(test_idx.begin(), test_idx.end());
    for (std::size_t i : test_idx) {
        const Eigen::Matrix3d gt = ds.truth.deltas[i + 1];
        cmp << i;
        for (std::size_t g = 0; g < n_groups; ++g) {
            const double err = fvg::geodesic_error(gt, table.estimates[i][g].second.matrix);
            analytic_sum[g] += err;
            cmp << "," << err;
        }
        const fvg::RotationEstimate refined = fvg::refine(model, table.estimates[i]);
        const double err = fvg::geodesic_error(gt, refined.matrix);
        lbto_sum += err;
        cmp << "," << err << "\n";
    }

    std::ofstream summary((fs::path(o.out_dir) / "eval_summary.csv").string());
    summary << "method,mean_err_rad,mean_err_deg\n" << std::setprecision(17);
    double best_analytic = std::numeric_limits<double>::infinity();
    std::vector<double> xs, ys;
    for (std::size_t g = 0; g < n_groups; ++g) {
        const double mean = analytic_sum[g] / n_test;
        best_analytic = std::min(best_analytic, mean);
        summary << "analytical_" << config_tag(table.layout.groups[g]) << "," << mean << ","
                << mean * 180.0 / fvg::kPi << "\n";
    }
    const double lbto_mean = lbto_sum / n_test;
    summary << "lbto," << lbto_mean << "," << lbto_mean * 180.0 / fvg::kPi << "\n";

    // Range sweep of the full --ranges list at the largest cutoff, as CSV
    // and an error-vs-r line plot.
    {
        const int cutoff = *std::max_element(o.cutoffs.begin(), o.cutoffs.end());
        Options sweep_opts = o;
        sweep_opts.cutoffs = {cutoff};
        const PairTable sweep = build_pair_table(sweep_opts, ctx, ds, o.ranges);
        std::ofstream rcsv((fs::path(o.out_dir) / "range_sweep.csv").string());
        rcsv << "mask_range,mean_err_rad,mean_err_deg\n" << std::setprecision(17);
        for (std::size_t g = 0; g < sweep.layout.groups.size(); ++g) {
            double sum = 0.0;
            for (std::size_t i = 0; i < sweep.estimates.size(); ++i)
                sum += fvg::geodesic_error(ds.truth.deltas[i + 1], sweep.estimates[i][g].second.matrix);
            const double mean = sum / sweep.estimates.size();
            rcsv << sweep.layout.groups[g].mask_range << "," << mean << ","
                 << mean * 180.0 / fvg::kPi << "\n";
            xs.push_back(sweep.layout.groups[g].mask_range);
            ys.push_back(mean * 180.0 / fvg::kPi);
        }
        fvg::write_svg_lines((fs::path(o.out_dir) / "range_sweep.svg").string(),
                             "mean delta error (deg) vs mask range", xs,
                             {{"L" + std::to_string(cutoff), ys}});
    }

    // Trajectory comparison: accumulated analytical best-config vs refined.
    {
        std::vector<fvg::RotationEstimate> best_deltas, lbto_deltas;
        std::size_t best_g = 0;
        for (std::size_t g = 1; g < n_groups; ++g)
            if (analytic_sum[g] < analytic_sum[best_g]) best_g = g;
        for (std::size_t i = 0; i < table.estimates.size(); ++i) {
            best_deltas.push_back(table.estimates[i][best_g].second);
            lbto_deltas.push_back(fvg::refine(model, table.estimates[i]));
        }
        const auto best_abs = fvg::accumulate(best_deltas);
        const auto lbto_abs = fvg::accumulate(lbto_deltas);
        std::vector<double> frames_x, best_y, lbto_y;
        std::ofstream tcsv((fs::path(o.out_dir) / "trajectory_compare.csv").string());
        tcsv << "frame_index,analytical_err_rad,lbto_err_rad\n" << std::setprecision(17);
        for (std::size_t i = 0; i < best_abs.size(); ++i) {
            const double ea = fvg::geodesic_error(ds.truth.rotations[i + 1], best_abs[i]);
            const double el = fvg::geodesic_error(ds.truth.rotations[i + 1], lbto_abs[i]);
            tcsv << i + 1 << "," << ea << "," << el << "\n";
            frames_x.push_back(static_cast<double>(i + 1));
            best_y.push_back(ea * 180.0 / fvg::kPi);
            lbto_y.push_back(el * 180.0 / fvg::kPi);
        }
        fvg::write_svg_lines((fs::path(o.out_dir) / "trajectory_compare.svg").string(),
                             "accumulated error (deg) vs frame", frames_x,
                             {{"analytical", best_y}, {"lbto", lbto_y}});
    }

    std::cout << "held-out pairs: " << n_test << "\nbest analytical mean error: "
              << best_analytic * 180.0 / fvg::kPi << " deg\nlbto mean error: "
              << lbto_mean * 180.0 / fvg::kPi << " deg\n";
    return 0;
}

int cmd_bench(Options& o) {
    fvg::PipelineContext ctx = load_context(o);
    write_manifest(o, "bench");
    const int n_frames = std::max(o.frames, 100);

    const fvg::SceneFunction scene = fvg::make_scene(o.seed, o.blobs);
    const auto seq = fvg::random_rotation_sequence(n_frames, 5.0 * fvg::kPi / 180.0, o.seed + 1);
    const fvg::MaskBank& bank = ctx.banks.begin()->second;

    auto stats = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return std::pair<double, double>{v[v.size() / 2], v[static_cast<std::size_t>(0.95 * v.size())]};
    };

    std::vector<double> sht_ms, mask_ms, kabsch_ms, mlp_ms;
    std::vector<fvg::ShCoefficients> coeffs(n_frames);
    for (int i = 0; i < n_frames; ++i) {
        const fvg::SphericalImage img = fvg::render(scene, seq.rotations[i], ctx.grid());
        const auto t0 = Clock::now();
        coeffs[i] = fvg::sh_forward(img, ctx.basis());
        sht_ms.push_back(ms_since(t0));
    }
    std::vector<fvg::TripletCloud> clouds(n_frames);
    for (int i = 0; i < n_frames; ++i) {
        const auto t0 = Clock::now();
        clouds[i] = fvg::triplet_cloud(coeffs[i], bank);
        mask_ms.push_back(ms_since(t0));
    }
    for (int i = 1; i < n_frames; ++i) {
        const auto t0 = Clock::now();
        (void)fvg::kabsch(clouds[i - 1], clouds[i]);
        kabsch_ms.push_back(ms_since(t0));
    }
    fvg::LbtoModel model(make_layout(o, default_feature_ranges(o)));
    model.init_weights(o.seed);
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < n_frames; ++i) {
        Eigen::VectorXd f(model.layout().input_dim());
        for (Eigen::Index k = 0; k < f.size(); ++k) f(k) = gauss(rng);
        const auto t0 = Clock::now();
        (void)fvg::mlp_forward(model.layers(), model.standardize(f));
        mlp_ms.push_back(ms_since(t0));
    }

    nlohmann::json report;
    report["frames"] = n_frames;
    report["machine"] = {{"hardware_concurrency", std::thread::hardware_concurrency()}};
    std::ifstream cpuinfo("/proc/cpuinfo");
    for (std::string line; std::getline(cpuinfo, line);)
        if (line.rfind("model name", 0) == 0) {
            report["machine"]["cpu"] = line.substr(line.find(':') + 2);
            break;
        }
    double total_median = 0.0;
    auto add = [&](const char* name, std::vector<double>& v) {
        const auto [med, p95] = stats(v);
        report["stages"][name] = {{"median_ms", med}, {"p95_ms", p95}};
        total_median += med;
        std::cout << name << ": median " << med << " ms, p95 " << p95 << " ms\n";
    };
    add("sht_forward", sht_ms);
    add("masked_moments", mask_ms);
    add("kabsch", kabsch_ms);
    add("mlp_inference", mlp_ms);
    report["total_median_ms"] = total_median;
    std::cout << "total (sum of stage medians): " << total_median << " ms\n";
    std::ofstream out(fs::path(o.out_dir) / "bench.json");
    out << report.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fast visual gyroscope: rotation estimation from spherical images"};
    app.require_subcommand(1);
    Options o;

    auto* precompute = app.add_subcommand("precompute", "build and cache the coefficient table + mask bank");
    auto* gen_data = app.add_subcommand("gen-data", "generate a synthetic rotation dataset");
    auto* estimate = app.add_subcommand("estimate", "estimate rotations over a dataset");
    auto* train = app.add_subcommand("train", "train the MLP refiner");
    auto* eval = app.add_subcommand("eval", "evaluate analytical vs refined estimates");
    auto* bench = app.add_subcommand("bench", "per-stage timing report");
    for (auto* sub : {precompute, gen_data, estimate, train, eval, bench}) add_shared_flags(sub, o);
    gen_data->add_option("--frames", o.frames, "frame count");
    gen_data->add_option("--blobs", o.blobs, "scene blob count");
    gen_data->add_option("--max-step-deg", o.max_step_deg, "max per-step rotation (degrees)");
    bench->add_option("--frames", o.frames, "benchmark frame count (>= 100)");
    for (auto* sub : {train, eval}) {
        sub->add_option("--test-fraction", o.test_fraction, "held-out fraction");
        sub->add_option("--epochs", o.epochs, "training epochs");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        o.finish();
        if (precompute->parsed()) return cmd_precompute(o);
        if (gen_data->parsed()) return cmd_gen_data(o);
        if (estimate->parsed()) return cmd_estimate(o);
        if (train->parsed()) return cmd_train(o);
        if (eval->parsed()) return cmd_eval(o);
        if (bench->parsed()) return cmd_bench(o);
    } catch (const CLI::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fvg::DegenerateCloud& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        if (msg.find("NaN") != std::string::npos) {
            std::cerr << "numerical failure: " << msg << "\n";
            return kExitNumeric;
        }
        std::cerr << "data error: " << msg << "\n";
        return kExitData;
    }
    return 0;
}
