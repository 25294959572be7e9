#pragma once

#include <algorithm>
#include <atomic>
#include <fstream>
#include <limits>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "fvg/dataset.hpp"
#include "fvg/lbto.hpp"
#include "fvg/mask.hpp"
#include "fvg/rotation.hpp"
#include "fvg/sh_transform.hpp"

namespace fvg {

/// Default mask geometry for a transition half-range r: the band midpoint
/// sits at z0 = -2r so the firm part of the cap (t > z0 + r = -r) grows
/// with r, and the softness tracks the band width.
inline MaskSpec default_mask_spec(const Eigen::Vector3d& center, double r) {
    MaskSpec spec;
    spec.center = center;
    spec.r = r;
    spec.z0 = -2.0 * r;
    spec.sigma = r / 2.0;
    spec.profile_exponent = 2;
    return spec;
}

inline std::vector<MaskSpec> default_mask_specs(const std::vector<Eigen::Vector3d>& centers, double r) {
    std::vector<MaskSpec> specs;
    specs.reserve(centers.size());
    for (const auto& c : centers) specs.push_back(default_mask_spec(c, r));
    return specs;
}

/// Shared precomputed state: grid, basis, C table, and one mask bank per
/// range value. The table order covers first-order moments of degree-12
/// mask polynomials (1 + 12).
struct PipelineContext {
    static constexpr int kPolyDegree = 12;
    static constexpr int kMaxOrder = 1 + kPolyDegree;

    // The basis keeps a pointer to the grid, so both live behind stable
    // addresses and the context stays movable.
    std::shared_ptr<const EquirectGrid> grid_ptr;
    std::shared_ptr<const ShBasisTable> basis_ptr;
    std::shared_ptr<MomentCoefficientTable> table;
    std::map<double, MaskBank> banks; // keyed by mask range r

    const EquirectGrid& grid() const { return *grid_ptr; }
    const ShBasisTable& basis() const { return *basis_ptr; }

    PipelineContext(int bandwidth, int height, int width, int n_masks, const std::vector<double>& ranges)
        : grid_ptr(std::make_shared<EquirectGrid>(build_equirect_grid(height, width))),
          basis_ptr(std::make_shared<ShBasisTable>(*grid_ptr, bandwidth)) {
        table = std::make_shared<MomentCoefficientTable>(
            build_coeff_table(bandwidth, kMaxOrder, *grid_ptr, *basis_ptr));
        add_banks(n_masks, ranges);
    }

    /// From a preloaded table (cache path): only the basis and banks are
    /// (re)built.
    PipelineContext(std::shared_ptr<MomentCoefficientTable> preloaded, int n_masks,
                    const std::vector<double>& ranges)
        : grid_ptr(std::make_shared<EquirectGrid>(
              build_equirect_grid(preloaded->grid_height(), preloaded->grid_width()))),
          basis_ptr(std::make_shared<ShBasisTable>(*grid_ptr, preloaded->bandwidth())),
          table(std::move(preloaded)) {
        add_banks(n_masks, ranges);
    }

    void add_banks(int n_masks, const std::vector<double>& ranges) {
        const auto centers = place_mask_centers(n_masks);
        for (double r : ranges)
            if (banks.find(r) == banks.end())
                banks.emplace(r, build_mask_bank(default_mask_specs(centers, r), kPolyDegree, table,
                                                 std::numeric_limits<double>::infinity()));
    }
};

/// Analytical estimates for one frame pair, one per (cutoff, range)
/// configuration of the layout, in layout order.
inline std::vector<std::pair<FeatureGroup, RotationEstimate>>
estimate_all_configs(const ShCoefficients& ref, const ShCoefficients& cur, const PipelineContext& ctx,
                     const FeatureLayout& layout, const EstimateOptions& opts = {}) {
    std::vector<std::pair<FeatureGroup, RotationEstimate>> out;
    std::map<int, std::pair<ShCoefficients, ShCoefficients>> filtered;
    for (const FeatureGroup& g : layout.groups) {
        auto it = filtered.find(g.filter_cutoff);
        if (it == filtered.end())
            it = filtered.emplace(g.filter_cutoff,
                                  std::make_pair(ref.low_pass(g.filter_cutoff),
                                                 cur.low_pass(g.filter_cutoff)))
                     .first;
        const auto bank = ctx.banks.find(g.mask_range);
        if (bank == ctx.banks.end())
            throw std::invalid_argument("estimate_all_configs: no bank for mask range " +
                                        std::to_string(g.mask_range));
        out.emplace_back(g, estimate_relative(it->second.first, it->second.second, bank->second, opts));
    }
    return out;
}

/// Run `work(i)` for i in [0, n) on up to `threads` workers. Exceptions are
/// re-thrown on the caller; output ordering is the caller's business (write
/// into index i of a preallocated vector for order determinism).
inline void parallel_for(int n, int threads, const std::function<void(int)>& work) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) work(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            try {
                for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) work(i);
            } catch (...) {
                errors[t] = std::current_exception();
                next.store(n);
            }
        });
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// One row of a trajectory CSV: ground truth vs estimate in axis-angle.
struct TrajectoryRow {
    int frame = 0;
    Eigen::Vector3d gt = Eigen::Vector3d::Zero();
    Eigen::Vector3d est = Eigen::Vector3d::Zero();
    double geodesic_error_rad = 0.0;
    double residual = 0.0;
};

inline void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_trajectory_csv: cannot open " + path + " for writing");
    out << "frame_index,gt_ax,gt_ay,gt_az,est_ax,est_ay,est_az,geodesic_error_rad,residual\n";
    out << std::setprecision(17);
    for (const TrajectoryRow& r : rows)
        out << r.frame << "," << r.gt.x() << "," << r.gt.y() << "," << r.gt.z() << "," << r.est.x()
            << "," << r.est.y() << "," << r.est.z() << "," << r.geodesic_error_rad << "," << r.residual
            << "\n";
    if (!out) throw std::runtime_error("write_trajectory_csv: write failed for " + path);
}

/// Minimal SVG line plot: one polyline per series over a shared x axis.
/// Rendering convenience only; the CSVs are the contract.
inline void write_svg_lines(const std::string& path, const std::string& title,
                            const std::vector<double>& x,
                            const std::vector<std::pair<std::string, std::vector<double>>>& series) {
    if (x.empty() || series.empty()) throw std::invalid_argument("write_svg_lines: empty plot");
    for (const auto& s : series)
        if (s.second.size() != x.size())
            throw std::invalid_argument("write_svg_lines: series '" + s.first + "' length mismatch");

    const double W = 640, H = 400, mx = 60, my = 40;
    double ymin = series[0].second[0], ymax = ymin;
    for (const auto& s : series)
        for (double v : s.second) {
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    if (ymax - ymin < 1e-300) ymax = ymin + 1.0;
    const double xmin = x.front(), xmax = x.back() == x.front() ? x.front() + 1.0 : x.back();
    auto px = [&](double v) { return mx + (v - xmin) / (xmax - xmin) * (W - 2 * mx); };
    auto py = [&](double v) { return H - my - (v - ymin) / (ymax - ymin) * (H - 2 * my); };
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_svg_lines: cannot open " + path + " for writing");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title
        << "</text>\n"
        << "<line x1=\"" << mx << "\" y1=\"" << H - my << "\" x2=\"" << W - mx << "\" y2=\"" << H - my
        << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << mx << "\" y1=\"" << my << "\" x2=\"" << mx << "\" y2=\"" << H - my
        << "\" stroke=\"black\"/>\n";
    out << std::setprecision(8);
    out << "<text x=\"" << mx - 5 << "\" y=\"" << py(ymin) << "\" text-anchor=\"end\" font-size=\"10\">"
        << ymin << "</text>\n"
        << "<text x=\"" << mx - 5 << "\" y=\"" << py(ymax) << "\" text-anchor=\"end\" font-size=\"10\">"
        << ymax << "</text>\n"
        << "<text x=\"" << px(xmin) << "\" y=\"" << H - my + 15
        << "\" text-anchor=\"middle\" font-size=\"10\">" << xmin << "</text>\n"
        << "<text x=\"" << px(xmax) << "\" y=\"" << H - my + 15
        << "\" text-anchor=\"middle\" font-size=\"10\">" << xmax << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        out << "<polyline fill=\"none\" stroke=\"" << colors[s % 6] << "\" points=\"";
        for (std::size_t i = 0; i < x.size(); ++i)
            out << px(x[i]) << "," << py(series[s].second[i]) << " ";
        out << "\"/>\n";
        out << "<text x=\"" << W - mx + 5 << "\" y=\"" << my + 14 * s << "\" font-size=\"10\" fill=\""
            << colors[s % 6] << "\">" << series[s].first << "</text>\n";
    }
    out << "</svg>\n";
    if (!out) throw std::runtime_error("write_svg_lines: write failed for " + path);
}

} // namespace fvg
