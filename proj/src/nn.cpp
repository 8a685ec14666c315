#include "amlbench/nn.hpp"

#include "amlbench/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace amlbench::nn {

Matrix glorot_uniform(Index fan_in, Index fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix m(fan_in, fan_out);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
    return m;
}

Linear::Linear(Index in, Index out, Rng& rng, bool with_bias)
    : weight(Tensor::parameter(glorot_uniform(in, out, rng))) {
    if (with_bias) bias = Tensor::parameter(Matrix::Zero(1, out));
}

Tensor Linear::operator()(const Tensor& x) const {
    Tensor y = matmul(x, weight);
    return bias.defined() ? add_row(y, bias) : y;
}

void Linear::append_params(const std::string& prefix, NamedParams& out) const {
    out.emplace_back(prefix + ".weight", weight);
    if (bias.defined()) out.emplace_back(prefix + ".bias", bias);
}

Adam::Adam(std::vector<Tensor> params, AdamOptions options) : params_(std::move(params)), opt_(options) {
    for (const auto& p : params_) {
        m_.push_back(Matrix::Zero(p.rows(), p.cols()));
        v_.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
}

namespace {

void check_finite_grads(std::span<const Tensor> params) {
    for (std::size_t i = 0; i < params.size(); ++i)
        if (!params[i].grad().allFinite())
            throw std::runtime_error("non-finite gradient in parameter " + std::to_string(i));
}

void adam_update(std::span<const Tensor> params, std::vector<Matrix>& m, std::vector<Matrix>& v, int t,
                 const AdamOptions& o) {
    const double c1 = 1.0 - std::pow(o.beta1, t);
    const double c2 = 1.0 - std::pow(o.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor p = params[i];
        const Matrix& g = p.grad();
        m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g;
        v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g.cwiseAbs2();
        p.mutable_value().array() -= o.lr * (m[i].array() / c1) / ((v[i].array() / c2).sqrt() + o.eps);
    }
}

}  // namespace

void Adam::step() {
    check_finite_grads(params_);
    ++t_;
    adam_update(params_, m_, v_, t_, opt_);
}

void Adam::zero_grad() {
    for (const auto& p : params_) p.zero_grad();
}

void adam_step(std::span<const Tensor> params, AdamState& state, const AdamOptions& options) {
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.push_back(Matrix::Zero(p.rows(), p.cols()));
            state.v.push_back(Matrix::Zero(p.rows(), p.cols()));
        }
    }
    if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state/parameter count mismatch");
    check_finite_grads(params);
    ++state.t;
    adam_update(params, state.m, state.v, state.t, options);
}

MlpDecoder::MlpDecoder(const MlpConfig& config, Rng& rng) : config_(config) {
    if (config.input_dim < 1) throw std::invalid_argument("MlpDecoder: input_dim must be >= 1");
    if (config.hidden_layers < 0) throw std::invalid_argument("MlpDecoder: negative hidden layer count");
    if (config.hidden_layers > 0 && config.hidden_dim < 1) throw std::invalid_argument("MlpDecoder: hidden_dim < 1");
    Index in = config.input_dim;
    for (int l = 0; l < config.hidden_layers; ++l) {
        layers_.emplace_back(in, config.hidden_dim, rng);
        in = config.hidden_dim;
    }
    layers_.emplace_back(in, 2, rng);
}

Tensor MlpDecoder::forward(const Tensor& features) const {
    if (features.cols() != config_.input_dim)
        throw std::invalid_argument("MlpDecoder: expected " + std::to_string(config_.input_dim) +
                                    " feature columns, got " + std::to_string(features.cols()));
    Tensor h = features;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        h = layers_[l](h);
        if (l + 1 < layers_.size()) h = relu(h);
    }
    return h;
}

NamedParams MlpDecoder::params() const {
    NamedParams out;
    for (std::size_t l = 0; l < layers_.size(); ++l) layers_[l].append_params("mlp." + std::to_string(l), out);
    return out;
}

Tensor mlp_forward(const MlpDecoder& decoder, const Tensor& features) { return decoder.forward(features); }

std::vector<double> inverse_prevalence_weights(std::span<const int> labels, std::span<const NodeId> rows) {
    double counts[2] = {0.0, 0.0};
    for (NodeId r : rows) counts[labels[r] == 1 ? 1 : 0] += 1.0;
    const double total = counts[0] + counts[1];
    std::vector<double> w(2, 1.0);
    for (int c = 0; c < 2; ++c) w[static_cast<std::size_t>(c)] = counts[c] > 0.0 ? total / (2.0 * counts[c]) : 1.0;
    return w;
}

std::vector<double> positive_class_probability(const Matrix& logits) {
    std::vector<double> p(static_cast<std::size_t>(logits.rows()));
    for (Index r = 0; r < logits.rows(); ++r) {
        // softmax over two logits == sigmoid of their difference
        const double d = logits(r, 1) - logits(r, 0);
        p[static_cast<std::size_t>(r)] = d >= 0.0 ? 1.0 / (1.0 + std::exp(-d)) : std::exp(d) / (1.0 + std::exp(d));
    }
    return p;
}

std::vector<TrainLogRow> train_mlp(MlpDecoder& decoder, const Matrix& features, std::span<const int> labels,
                                   std::span<const NodeId> train_rows, const MlpTrainOptions& options) {
    if (train_rows.empty()) throw std::invalid_argument("train_mlp: no training rows");
    std::vector<Tensor> params;
    for (auto& [_, t] : decoder.params()) params.push_back(t);
    Adam adam(params, {.lr = options.lr});
    const std::vector<double> weights =
        options.class_weighting ? inverse_prevalence_weights(labels, train_rows) : std::vector<double>{};

    // Only the rows that enter the loss or the validation metrics need a
    // forward pass; gathering them first keeps each epoch proportional to them.
    std::vector<NodeId> rows(train_rows.begin(), train_rows.end());
    rows.insert(rows.end(), options.validation_rows.begin(), options.validation_rows.end());
    Matrix batch(static_cast<Index>(rows.size()), features.cols());
    std::vector<int> batch_labels(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        batch.row(static_cast<Index>(k)) = features.row(rows[k]);
        batch_labels[k] = labels[rows[k]];
    }
    const Tensor x = Tensor::constant(std::move(batch));
    std::vector<NodeId> train_idx(train_rows.size()), val_idx(options.validation_rows.size());
    for (std::size_t k = 0; k < train_idx.size(); ++k) train_idx[k] = static_cast<NodeId>(k);
    for (std::size_t k = 0; k < val_idx.size(); ++k) val_idx[k] = static_cast<NodeId>(train_idx.size() + k);

    std::vector<TrainLogRow> log;
    log.reserve(static_cast<std::size_t>(options.epochs));
    for (int epoch = 1; epoch <= options.epochs; ++epoch) {
        adam.zero_grad();
        const Tensor logits = decoder.forward(x);
        const Tensor loss = masked_cross_entropy(logits, batch_labels, train_idx, weights);
        if (!std::isfinite(loss.item()))
            throw std::runtime_error("decoder training loss is non-finite at epoch " + std::to_string(epoch));
        loss.backward();
        adam.step();
        TrainLogRow row{epoch, loss.item(), 0.0, 0.0};
        if (!val_idx.empty()) {
            row.val_loss = masked_cross_entropy(logits, batch_labels, val_idx, weights).item();
            const auto probs = positive_class_probability(logits.value());
            std::vector<ScoredNode> scored;
            scored.reserve(val_idx.size());
            for (NodeId k : val_idx) scored.push_back({k, probs[k], batch_labels[k] == 1});
            const bool any_pos = std::any_of(scored.begin(), scored.end(), [](const auto& s) { return s.illicit; });
            row.val_auc_pr = any_pos ? auc_pr(scored) : 0.0;
        }
        log.push_back(row);
    }
    return log;
}

void save_checkpoint(const std::filesystem::path& path, const NamedParams& params) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out << "amlbench-checkpoint 1 " << params.size() << '\n';
    char buf[64];
    for (const auto& [name, t] : params) {
        if (name.find_first_of(" \n") != std::string::npos)
            throw std::invalid_argument("checkpoint names must not contain whitespace");
        out << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
        const Matrix& v = t.value();
        for (Index i = 0; i < v.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%a", v.data()[i]);
            out << buf << ((i + 1) % v.cols() == 0 ? '\n' : ' ');
        }
    }
}

void load_checkpoint(const std::filesystem::path& path, NamedParams& params) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    std::string magic;
    int version = 0;
    std::size_t count = 0;
    in >> magic >> version >> count;
    if (magic != "amlbench-checkpoint" || version != 1) throw std::runtime_error("not a checkpoint: " + path.string());
    if (count != params.size()) throw std::runtime_error("checkpoint parameter count mismatch");
    for (std::size_t k = 0; k < count; ++k) {
        std::string name;
        Index rows = 0, cols = 0;
        in >> name >> rows >> cols;
        auto it = std::find_if(params.begin(), params.end(), [&](const auto& p) { return p.first == name; });
        if (it == params.end()) throw std::runtime_error("checkpoint has unexpected parameter " + name);
        Tensor& t = it->second;
        if (t.rows() != rows || t.cols() != cols) throw std::runtime_error("shape mismatch for " + name);
        Matrix& v = t.mutable_value();
        std::string token;
        for (Index i = 0; i < v.size(); ++i) {
            if (!(in >> token)) throw std::runtime_error("truncated checkpoint at " + name);
            v.data()[i] = std::strtod(token.c_str(), nullptr);
        }
    }
}

}  // namespace amlbench::nn
