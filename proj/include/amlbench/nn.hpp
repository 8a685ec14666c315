#pragma once

#include "amlbench/autodiff.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace amlbench::nn {

/// Named learnable tensors of one model, in a fixed order.
using NamedParams = std::vector<std::pair<std::string, Tensor>>;

/// Uniform Glorot: U(-b, b) with b = sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(Index fan_in, Index fan_out, Rng& rng);

struct Linear {
    Tensor weight;  // in x out
    Tensor bias;    // 1 x out

    Linear() = default;
    Linear(Index in, Index out, Rng& rng, bool with_bias = true);
    Tensor operator()(const Tensor& x) const;
    Index in_dim() const { return weight.rows(); }
    Index out_dim() const { return weight.cols(); }
    void append_params(const std::string& prefix, NamedParams& out) const;
};

struct AdamOptions {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adaptive-moment optimiser with bias correction.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamOptions options);

    /// Applies one update from the accumulated gradients. Throws
    /// std::runtime_error if any gradient is non-finite (parameters untouched).
    void step();
    void zero_grad();
    int steps_taken() const { return t_; }
    const AdamOptions& options() const { return opt_; }

private:
    std::vector<Tensor> params_;
    std::vector<Matrix> m_, v_;
    AdamOptions opt_;
    int t_ = 0;
};

/// Single Adam update on `params` with explicit moment state. The functional
/// form of Adam::step, for callers that keep their own state.
struct AdamState {
    std::vector<Matrix> m, v;
    int t = 0;
};
void adam_step(std::span<const Tensor> params, AdamState& state, const AdamOptions& options);

struct MlpConfig {
    Index input_dim = 0;
    int hidden_layers = 1;  // [1, 3]
    int hidden_dim = 10;    // [5, 20]
};

/// Rectifier MLP ending in a 2-logit output layer.
class MlpDecoder {
public:
    MlpDecoder() = default;
    MlpDecoder(const MlpConfig& config, Rng& rng);

    /// Throws std::invalid_argument if the feature width differs from input_dim.
    Tensor forward(const Tensor& features) const;
    const MlpConfig& config() const { return config_; }
    const std::vector<Linear>& layers() const { return layers_; }
    std::vector<Linear>& layers() { return layers_; }
    NamedParams params() const;

private:
    MlpConfig config_;
    std::vector<Linear> layers_;
};

Tensor mlp_forward(const MlpDecoder& decoder, const Tensor& features);

/// Inverse-prevalence weights over the rows given (two classes).
std::vector<double> inverse_prevalence_weights(std::span<const int> labels, std::span<const NodeId> rows);

struct TrainLogRow {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_auc_pr = 0.0;
};

struct MlpTrainOptions {
    int epochs = 100;
    double lr = 0.01;
    bool class_weighting = false;
    /// Evaluate validation loss/AUC-PR every epoch when non-empty.
    std::vector<NodeId> validation_rows;
};

/// Full-batch training on `train_rows`. Returns the per-epoch log.
std::vector<TrainLogRow> train_mlp(MlpDecoder& decoder, const Matrix& features, std::span<const int> labels,
                                   std::span<const NodeId> train_rows, const MlpTrainOptions& options);

/// Probability of class 1 (illicit) for every row.
std::vector<double> positive_class_probability(const Matrix& logits);

/// Text checkpoint: one "name rows cols" header line followed by the values in
/// hexadecimal floating point, so reloading is bit-exact.
void save_checkpoint(const std::filesystem::path& path, const NamedParams& params);
/// Loads values into the existing tensors by name; shapes must match.
void load_checkpoint(const std::filesystem::path& path, NamedParams& params);

}  // namespace amlbench::nn
