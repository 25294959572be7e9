#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fvg/rotation.hpp"

namespace fvg {

/// One analytical configuration feeding the refiner: a low-pass cutoff and
/// a mask range. Each group contributes 4 feature slots (axis-angle + the
/// Kabsch residual).
struct FeatureGroup {
    int filter_cutoff = 32;
    double mask_range = 0.5;

    friend bool operator==(const FeatureGroup&, const FeatureGroup&) = default;
};

struct FeatureLayout {
    std::vector<FeatureGroup> groups;

    int input_dim() const { return 4 * static_cast<int>(groups.size()); }
};

/// Raw (unstandardized) feature vector: per group, axis-angle then residual.
inline Eigen::VectorXd feature_vector(const FeatureLayout& layout,
                                      const std::vector<std::pair<FeatureGroup, RotationEstimate>>& estimates) {
    if (estimates.size() != layout.groups.size())
        throw std::invalid_argument("feature_vector: expected " + std::to_string(layout.groups.size()) +
                                    " estimate groups, got " + std::to_string(estimates.size()));
    Eigen::VectorXd out(layout.input_dim());
    for (std::size_t g = 0; g < layout.groups.size(); ++g) {
        if (!(estimates[g].first == layout.groups[g]))
            throw std::invalid_argument("feature_vector: estimate group " + std::to_string(g) +
                                        " does not match the layout");
        out.segment<3>(4 * g) = estimates[g].second.axis_angle;
        out(4 * g + 3) = estimates[g].second.residual;
    }
    return out;
}

struct TrainConfig {
    int epochs = 200;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double lr_decay = 0.97;    // per-epoch multiplicative decay
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double swa_start_fraction = 0.75;
    int swa_cycle = 1;         // snapshot every this many epochs once SWA starts
    std::uint64_t seed = 0;

    void validate() const {
        if (lr_decay <= 0.0 || lr_decay > 1.0)
            throw std::invalid_argument("TrainConfig: lr_decay must be in (0, 1]");
        if (swa_start_fraction < 0.0 || swa_start_fraction >= 1.0)
            throw std::invalid_argument("TrainConfig: swa_start_fraction must be in [0, 1)");
        if (epochs < 1 || batch_size < 1 || swa_cycle < 1)
            throw std::invalid_argument("TrainConfig: epochs, batch_size, swa_cycle must be positive");
    }
};

struct LbtoSample {
    Eigen::VectorXd features;   // raw, layout order
    Eigen::Vector3d target;     // ground-truth delta-rotation axis-angle
};
using LbtoDataset = std::vector<LbtoSample>;

struct MlpLayer {
    Eigen::MatrixXd weights; // out x in
    Eigen::VectorXd bias;    // out
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> learning_rate;
};

/// The 128x64x32 refiner MLP (ReLU hidden layers, linear 3-d output) plus
/// feature layout, per-feature standardization statistics, and the SWA
/// weight average used at inference.
class LbtoModel {
  public:
    static constexpr int kHidden[3] = {128, 64, 32};
    static constexpr int kOutput = 3;

    explicit LbtoModel(FeatureLayout layout = {}) : layout_(std::move(layout)) {
        const int in = layout_.input_dim();
        dims_ = {in, kHidden[0], kHidden[1], kHidden[2], kOutput};
        for (std::size_t i = 0; i + 1 < dims_.size(); ++i)
            layers_.push_back({Eigen::MatrixXd::Zero(dims_[i + 1], dims_[i]),
                               Eigen::VectorXd::Zero(dims_[i + 1])});
        feature_mean_ = Eigen::VectorXd::Zero(in);
        feature_std_ = Eigen::VectorXd::Ones(in);
    }

    const FeatureLayout& layout() const { return layout_; }
    const std::vector<int>& dims() const { return dims_; }
    std::vector<MlpLayer>& layers() { return layers_; }
    const std::vector<MlpLayer>& layers() const { return layers_; }
    const std::vector<MlpLayer>& swa_layers() const { return swa_layers_; }
    bool has_swa() const { return !swa_layers_.empty(); }
    bool trained() const { return trained_; }
    double train_rms() const { return train_rms_; }
    const Eigen::VectorXd& feature_mean() const { return feature_mean_; }
    const Eigen::VectorXd& feature_std() const { return feature_std_; }
    const Eigen::Vector3d& target_mean() const { return target_mean_; }
    const Eigen::Vector3d& target_std() const { return target_std_; }
    const TrainConfig& config() const { return config_; }
    double final_train_mse() const { return final_train_mse_; }
    double final_val_mse() const { return final_val_mse_; }

    void set_standardization(Eigen::VectorXd mean, Eigen::VectorXd std) {
        feature_mean_ = std::move(mean);
        feature_std_ = std::move(std);
    }
    // Targets are standardized too: raw axis-angle components (~1e-2 rad)
    // sit far below the He-init output scale, which stalls Adam badly.
    void set_target_standardization(Eigen::Vector3d mean, Eigen::Vector3d std) {
        target_mean_ = std::move(mean);
        target_std_ = std::move(std);
    }
    void set_swa(std::vector<MlpLayer> snapshot) { swa_layers_ = std::move(snapshot); }
    void mark_trained(const TrainConfig& cfg, double train_rms, double train_mse, double val_mse) {
        trained_ = true;
        config_ = cfg;
        train_rms_ = train_rms;
        final_train_mse_ = train_mse;
        final_val_mse_ = val_mse;
    }

    Eigen::VectorXd standardize(const Eigen::VectorXd& raw) const {
        return (raw - feature_mean_).cwiseQuotient(feature_std_);
    }
    Eigen::VectorXd destandardize(const Eigen::VectorXd& std_features) const {
        return std_features.cwiseProduct(feature_std_) + feature_mean_;
    }
    Eigen::Vector3d standardize_target(const Eigen::Vector3d& raw) const {
        return (raw - target_mean_).cwiseQuotient(target_std_);
    }
    Eigen::Vector3d destandardize_target(const Eigen::Vector3d& net_out) const {
        return net_out.cwiseProduct(target_std_) + target_mean_;
    }

    /// Seeded He-normal initialization of all layers.
    void init_weights(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (MlpLayer& layer : layers_) {
            const double scale = std::sqrt(2.0 / layer.weights.cols());
            for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
                for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                    layer.weights(r, c) = scale * gauss(rng);
            layer.bias.setZero();
        }
        swa_layers_.clear();
        trained_ = false;
    }

  private:
    FeatureLayout layout_;
    std::vector<int> dims_;
    std::vector<MlpLayer> layers_;
    std::vector<MlpLayer> swa_layers_;
    Eigen::VectorXd feature_mean_, feature_std_;
    Eigen::Vector3d target_mean_ = Eigen::Vector3d::Zero();
    Eigen::Vector3d target_std_ = Eigen::Vector3d::Ones();
    bool trained_ = false;
    double train_rms_ = 0.0;
    double final_train_mse_ = 0.0;
    double final_val_mse_ = 0.0;
    TrainConfig config_;
};

namespace detail {

/// Batch forward pass; columns are samples. Returns per-layer
/// pre-activations (for backprop) with the network output last.
inline std::vector<Eigen::MatrixXd> mlp_forward_all(const std::vector<MlpLayer>& layers,
                                                    const Eigen::MatrixXd& X) {
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(layers.size() + 1);
    acts.push_back(X);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Eigen::MatrixXd Z = (layers[i].weights * acts.back()).colwise() + layers[i].bias;
        if (i + 1 < layers.size()) Z = Z.cwiseMax(0.0); // ReLU on hidden layers
        acts.push_back(std::move(Z));
    }
    return acts;
}

} // namespace detail

/// Forward pass on standardized features using the given layer stack.
inline Eigen::Vector3d mlp_forward(const std::vector<MlpLayer>& layers, const Eigen::VectorXd& features) {
    if (features.size() != layers.front().weights.cols())
        throw std::invalid_argument("mlp_forward: feature length " + std::to_string(features.size()) +
                                    " does not match input dim " +
                                    std::to_string(layers.front().weights.cols()));
    return detail::mlp_forward_all(layers, features).back();
}

/// Inference entry point: standardizes the raw features, runs the SWA
/// weights when available (final weights otherwise) and maps the network
/// output back to raw target units.
inline Eigen::Vector3d forward(const LbtoModel& model, const Eigen::VectorXd& raw_features) {
    const auto& layers = model.has_swa() ? model.swa_layers() : model.layers();
    return model.destandardize_target(mlp_forward(layers, model.standardize(raw_features)));
}

inline double mse_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw std::invalid_argument("mse_loss: shape mismatch");
    return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

/// Loss and per-layer parameter gradients for one standardized batch
/// (columns are samples). Plain backprop through the ReLU stack.
inline double mlp_loss_and_gradients(const std::vector<MlpLayer>& layers, const Eigen::MatrixXd& X,
                                     const Eigen::MatrixXd& Y, std::vector<MlpLayer>& grads) {
    const auto acts = detail::mlp_forward_all(layers, X);
    const double loss = mse_loss(acts.back(), Y);

    grads.resize(layers.size());
    Eigen::MatrixXd delta = 2.0 * (acts.back() - Y) / static_cast<double>(Y.size());
    for (std::size_t i = layers.size(); i-- > 0;) {
        grads[i].weights = delta * acts[i].transpose();
        grads[i].bias = delta.rowwise().sum();
        if (i > 0) {
            delta = layers[i].weights.transpose() * delta;
            delta = delta.cwiseProduct((acts[i].array() > 0.0).cast<double>().matrix());
        }
    }
    return loss;
}

/// Deterministic shuffled split; n_test = round(n * test_fraction).
inline std::pair<LbtoDataset, LbtoDataset> split_dataset(const LbtoDataset& dataset, double test_fraction,
                                                         std::uint64_t seed) {
    if (test_fraction <= 0.0 || test_fraction >= 1.0)
        throw std::invalid_argument("split_dataset: test_fraction must be in (0, 1)");
    const std::size_t n = dataset.size();
    const std::size_t n_test = static_cast<std::size_t>(std::lround(n * test_fraction));
    if (n_test == 0 || n_test == n)
        throw std::invalid_argument("split_dataset: split produces an empty partition");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    LbtoDataset train, test;
    for (std::size_t i = 0; i < n; ++i)
        (i < n_test ? test : train).push_back(dataset[idx[i]]);
    return {std::move(train), std::move(test)};
}

/// Adam with per-epoch learning-rate decay and stochastic weight averaging
/// from `swa_start_fraction` of the epochs onward. Training is
/// single-threaded and fully deterministic under the config seed.
inline TrainHistory train(LbtoModel& model, const LbtoDataset& train_set, const LbtoDataset& val_set,
                          const TrainConfig& config) {
    config.validate();
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    const int in_dim = model.layout().input_dim();
    for (const LbtoSample& s : train_set)
        if (s.features.size() != in_dim)
            throw std::invalid_argument("train: sample feature length does not match the model layout");

    // Per-feature standardization statistics from the training set.
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(in_dim);
    for (const LbtoSample& s : train_set) mean += s.features;
    mean /= static_cast<double>(train_set.size());
    Eigen::VectorXd var = Eigen::VectorXd::Zero(in_dim);
    for (const LbtoSample& s : train_set) var += (s.features - mean).cwiseAbs2();
    var /= static_cast<double>(train_set.size());
    Eigen::VectorXd std = var.cwiseSqrt().cwiseMax(1e-12);
    model.set_standardization(mean, std);

    Eigen::Vector3d tmean = Eigen::Vector3d::Zero();
    for (const LbtoSample& s : train_set) tmean += s.target;
    tmean /= static_cast<double>(train_set.size());
    Eigen::Vector3d tvar = Eigen::Vector3d::Zero();
    for (const LbtoSample& s : train_set) tvar += (s.target - tmean).cwiseAbs2();
    tvar /= static_cast<double>(train_set.size());
    model.set_target_standardization(tmean, tvar.cwiseSqrt().cwiseMax(1e-12));

    auto to_matrices = [&](const LbtoDataset& set, Eigen::MatrixXd& X, Eigen::MatrixXd& Y) {
        X.resize(in_dim, set.size());
        Y.resize(3, set.size());
        for (std::size_t i = 0; i < set.size(); ++i) {
            X.col(i) = model.standardize(set[i].features);
            Y.col(i) = model.standardize_target(set[i].target);
        }
    };
    Eigen::MatrixXd Xtr, Ytr, Xval, Yval;
    to_matrices(train_set, Xtr, Ytr);
    if (!val_set.empty()) to_matrices(val_set, Xval, Yval);

    model.init_weights(config.seed);
    auto& layers = model.layers();

    std::vector<MlpLayer> m1(layers.size()), m2(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        m1[i] = {Eigen::MatrixXd::Zero(layers[i].weights.rows(), layers[i].weights.cols()),
                 Eigen::VectorXd::Zero(layers[i].bias.size())};
        m2[i] = m1[i];
    }

    std::vector<MlpLayer> swa_sum;
    int swa_count = 0;
    const int swa_start = static_cast<int>(config.swa_start_fraction * config.epochs);

    std::mt19937_64 rng(config.seed + 1);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    TrainHistory history;
    std::vector<MlpLayer> grads;
    long step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = config.learning_rate * std::pow(config.lr_decay, epoch);
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batches) {
            const std::size_t bsz = std::min<std::size_t>(config.batch_size, order.size() - start);
            Eigen::MatrixXd Xb(in_dim, bsz), Yb(3, bsz);
            for (std::size_t i = 0; i < bsz; ++i) {
                Xb.col(i) = Xtr.col(order[start + i]);
                Yb.col(i) = Ytr.col(order[start + i]);
            }
            const double loss = mlp_loss_and_gradients(layers, Xb, Yb, grads);
            if (!std::isfinite(loss))
                throw std::runtime_error("train: NaN loss at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(batches));
            epoch_loss += loss;
            ++step;
            const double bc1 = 1.0 - std::pow(config.adam_beta1, step);
            const double bc2 = 1.0 - std::pow(config.adam_beta2, step);
            for (std::size_t i = 0; i < layers.size(); ++i) {
                auto adam = [&](Eigen::Ref<Eigen::MatrixXd> p, Eigen::Ref<Eigen::MatrixXd> g,
                                Eigen::Ref<Eigen::MatrixXd> v1, Eigen::Ref<Eigen::MatrixXd> v2) {
                    v1 = config.adam_beta1 * v1 + (1.0 - config.adam_beta1) * g;
                    v2 = config.adam_beta2 * v2.array().matrix() +
                         (1.0 - config.adam_beta2) * g.cwiseAbs2();
                    p -= lr * ((v1 / bc1).array() / ((v2 / bc2).array().sqrt() + config.adam_eps)).matrix();
                };
                adam(layers[i].weights, grads[i].weights, m1[i].weights, m2[i].weights);
                adam(layers[i].bias, grads[i].bias, m1[i].bias, m2[i].bias);
            }
        }

        if (epoch >= swa_start && (epoch - swa_start) % config.swa_cycle == 0) {
            if (swa_sum.empty()) swa_sum = layers;
            else
                for (std::size_t i = 0; i < layers.size(); ++i) {
                    swa_sum[i].weights += layers[i].weights;
                    swa_sum[i].bias += layers[i].bias;
                }
            ++swa_count;
        }

        history.train_loss.push_back(epoch_loss / std::max(batches, 1));
        history.learning_rate.push_back(lr);
        if (!val_set.empty())
            history.val_loss.push_back(mse_loss(detail::mlp_forward_all(layers, Xval).back(), Yval));
    }

    if (swa_count > 0) {
        for (auto& layer : swa_sum) {
            layer.weights /= swa_count;
            layer.bias /= swa_count;
        }
        model.set_swa(swa_sum);
    }

    // Final MSEs are reported in raw target units (rad^2 per component) so
    // train_rms stays meaningful as a confidence proxy.
    const auto& final_layers = model.has_swa() ? model.swa_layers() : model.layers();
    auto raw_mse = [&](const Eigen::MatrixXd& X, const LbtoDataset& set) {
        const Eigen::MatrixXd P = detail::mlp_forward_all(final_layers, X).back();
        double acc = 0.0;
        for (std::size_t i = 0; i < set.size(); ++i)
            acc += (model.destandardize_target(Eigen::Vector3d(P.col(i))) - set[i].target)
                       .squaredNorm();
        return acc / (3.0 * static_cast<double>(set.size()));
    };
    const double train_mse = raw_mse(Xtr, train_set);
    const double val_mse = val_set.empty() ? train_mse : raw_mse(Xval, val_set);
    model.mark_trained(config, std::sqrt(train_mse), train_mse, val_mse);
    return history;
}

inline TrainHistory train(LbtoModel& model, const LbtoDataset& dataset, const TrainConfig& config) {
    return train(model, dataset, LbtoDataset{}, config);
}

/// Refined estimate: MLP output interpreted as a delta-rotation axis-angle.
/// The residual field carries the model's training-set RMS as a confidence
/// proxy.
inline RotationEstimate refine(const LbtoModel& model,
                               const std::vector<std::pair<FeatureGroup, RotationEstimate>>& estimates) {
    if (!model.trained()) throw std::runtime_error("refine: model has not been trained");
    RotationEstimate out;
    out.axis_angle = forward(model, feature_vector(model.layout(), estimates));
    out.matrix = axis_angle_to_rot(out.axis_angle);
    out.residual = model.train_rms();
    return out;
}

} // namespace fvg
