#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fvg/lbto.hpp"

namespace fvg {

namespace detail {

inline nlohmann::json layers_to_json(const std::vector<MlpLayer>& layers) {
    nlohmann::json arr = nlohmann::json::array();
    for (const MlpLayer& layer : layers) {
        std::vector<double> w(layer.weights.size());
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                w[static_cast<std::size_t>(r) * layer.weights.cols() + c] = layer.weights(r, c);
        arr.push_back({{"rows", layer.weights.rows()},
                       {"cols", layer.weights.cols()},
                       {"weights", w},
                       {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}});
    }
    return arr;
}

inline std::vector<MlpLayer> layers_from_json(const nlohmann::json& arr) {
    std::vector<MlpLayer> layers;
    for (const auto& j : arr) {
        MlpLayer layer;
        const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
        const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
        const auto w = j.at("weights").get<std::vector<double>>();
        const auto b = j.at("bias").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(w.size()) != rows * cols ||
            static_cast<Eigen::Index>(b.size()) != rows)
            throw std::runtime_error("model: layer payload size mismatch");
        layer.weights.resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c)
                layer.weights(r, c) = w[static_cast<std::size_t>(r) * cols + c];
        layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
        layers.push_back(std::move(layer));
    }
    return layers;
}

} // namespace detail

inline void save_model(const std::string& path, const LbtoModel& model) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["activation"] = "relu";
    j["dims"] = model.dims();
    nlohmann::json groups = nlohmann::json::array();
    for (const FeatureGroup& g : model.layout().groups)
        groups.push_back({{"filter_cutoff", g.filter_cutoff}, {"mask_range", g.mask_range}});
    j["feature_layout"] = groups;
    const auto& mean = model.feature_mean();
    const auto& std = model.feature_std();
    j["feature_mean"] = std::vector<double>(mean.data(), mean.data() + mean.size());
    j["feature_std"] = std::vector<double>(std.data(), std.data() + std.size());
    const auto& tmean = model.target_mean();
    const auto& tstd = model.target_std();
    j["target_mean"] = std::vector<double>(tmean.data(), tmean.data() + 3);
    j["target_std"] = std::vector<double>(tstd.data(), tstd.data() + 3);
    j["layers"] = detail::layers_to_json(model.layers());
    j["has_swa"] = model.has_swa();
    if (model.has_swa()) j["swa_layers"] = detail::layers_to_json(model.swa_layers());
    j["trained"] = model.trained();
    j["train_rms"] = model.train_rms();
    j["final_train_mse"] = model.final_train_mse();
    j["final_val_mse"] = model.final_val_mse();
    const TrainConfig& c = model.config();
    j["train_config"] = {{"epochs", c.epochs},
                         {"batch_size", c.batch_size},
                         {"learning_rate", c.learning_rate},
                         {"lr_decay", c.lr_decay},
                         {"adam_beta1", c.adam_beta1},
                         {"adam_beta2", c.adam_beta2},
                         {"adam_eps", c.adam_eps},
                         {"swa_start_fraction", c.swa_start_fraction},
                         {"swa_cycle", c.swa_cycle},
                         {"seed", c.seed}};

    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_model: cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

inline LbtoModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    nlohmann::json j;
    in >> j;
    if (j.at("format_version").get<int>() != 1)
        throw std::runtime_error("load_model: unsupported format version in " + path);
    if (j.at("activation").get<std::string>() != "relu")
        throw std::runtime_error("load_model: unsupported activation in " + path);

    FeatureLayout layout;
    for (const auto& g : j.at("feature_layout"))
        layout.groups.push_back({g.at("filter_cutoff").get<int>(), g.at("mask_range").get<double>()});

    LbtoModel model(layout);
    if (j.at("dims").get<std::vector<int>>() != model.dims())
        throw std::runtime_error("load_model: layer dims do not match the feature layout in " + path);

    const auto mean = j.at("feature_mean").get<std::vector<double>>();
    const auto std = j.at("feature_std").get<std::vector<double>>();
    model.set_standardization(Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size()),
                              Eigen::Map<const Eigen::VectorXd>(std.data(), std.size()));
    const auto tmean = j.at("target_mean").get<std::vector<double>>();
    const auto tstd = j.at("target_std").get<std::vector<double>>();
    if (tmean.size() != 3 || tstd.size() != 3)
        throw std::runtime_error("load_model: target standardization payload size mismatch");
    model.set_target_standardization(Eigen::Map<const Eigen::Vector3d>(tmean.data()),
                                     Eigen::Map<const Eigen::Vector3d>(tstd.data()));

    auto layers = detail::layers_from_json(j.at("layers"));
    if (layers.size() != model.layers().size())
        throw std::runtime_error("load_model: layer count mismatch in " + path);
    model.layers() = std::move(layers);
    if (j.at("has_swa").get<bool>()) model.set_swa(detail::layers_from_json(j.at("swa_layers")));

    if (j.at("trained").get<bool>()) {
        TrainConfig c;
        const auto& tc = j.at("train_config");
        c.epochs = tc.at("epochs").get<int>();
        c.batch_size = tc.at("batch_size").get<int>();
        c.learning_rate = tc.at("learning_rate").get<double>();
        c.lr_decay = tc.at("lr_decay").get<double>();
        c.adam_beta1 = tc.at("adam_beta1").get<double>();
        c.adam_beta2 = tc.at("adam_beta2").get<double>();
        c.adam_eps = tc.at("adam_eps").get<double>();
        c.swa_start_fraction = tc.at("swa_start_fraction").get<double>();
        c.swa_cycle = tc.at("swa_cycle").get<int>();
        c.seed = tc.at("seed").get<std::uint64_t>();
        model.mark_trained(c, j.at("train_rms").get<double>(), j.at("final_train_mse").get<double>(),
                           j.at("final_val_mse").get<double>());
    }
    return model;
}

} // namespace fvg
