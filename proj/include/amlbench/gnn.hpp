#pragma once

#include "amlbench/graph.hpp"
#include "amlbench/nn.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace amlbench::gnn {

using nn::Index;
using nn::Matrix;
using nn::Reduce;
using nn::Segments;
using nn::Tensor;

enum class Architecture { Gcn, Sage, Gat, Gin };

const char* to_string(Architecture arch);
std::optional<Architecture> parse_architecture(const std::string& name);
const char* to_string(Reduce aggregator);
std::optional<Reduce> parse_aggregator(const std::string& name);

struct GnnConfig {
    Architecture architecture = Architecture::Gcn;
    int latent_dim = 64;    // [32, 128]
    int hidden_dim = 128;   // [64, 256], GCN/GraphSAGE only
    int layers = 2;         // [1, 3]
    double dropout = 0.0;   // [0, 0.5]
    double learning_rate = 0.01;
    int epochs = 100;
    int sample_size = 5;    // GraphSAGE neighbours per node, [2, 5]
    Reduce aggregator = Reduce::Mean;
    int heads = 1;          // GAT, [1, 5]
    double attention_slope = 0.2;
    bool directed_mp = false;
    bool class_weighting = false;
    std::uint64_t seed = 0;
};

/// Tuned Elliptic values per architecture.
GnnConfig tuned_config(Architecture arch);

/// Output width of GNN layer `l` (0-based): the hidden width for all but the
/// last GCN/GraphSAGE layer, the latent width otherwise.
int layer_output_dim(const GnnConfig& config, int l);

/// Message-passing structure derived once per graph.
struct GraphStructure {
    std::size_t num_nodes = 0;
    /// Who each node receives messages from (no self-loops, deduplicated).
    Segments neighbors;
    /// neighbors plus the node itself, self first.
    Segments neighbors_with_self;
    /// D~^-1/2 (A + I) D~^-1/2.
    std::shared_ptr<const nn::SparseOperator> gcn_operator;

    /// Coefficient of (i <- j) in gcn_operator; 0 if absent.
    double gcn_coefficient(NodeId i, NodeId j) const;
};

/// Undirected messages by default; with `directed_mp` node v hears only
/// from its in-neighbours.
GraphStructure build_structure(const TransactionGraph& graph, bool directed_mp = false);

/// Up to `sample_size` neighbours per node, without replacement.
Segments sample_neighbors(const Segments& neighbors, int sample_size, Rng& rng);

struct GcnLayer {
    nn::Linear linear;  // weight in x out, bias added after propagation

    GcnLayer() = default;
    GcnLayer(Index in, Index out, Rng& rng);
    Tensor forward(const Tensor& h, const GraphStructure& s) const;
};

struct SageLayer {
    nn::Linear linear;  // (2 * in) x out over [self | aggregated]
    Reduce aggregator = Reduce::Mean;

    SageLayer() = default;
    SageLayer(Index in, Index out, Reduce aggregator, Rng& rng);
    Tensor forward(const Tensor& h, const Segments& sampled) const;
};

struct GatLayer {
    std::vector<nn::Linear> source;  // per head, applied to the sending node
    std::vector<nn::Linear> target;  // per head, applied to the receiving node
    std::vector<Tensor> attention;   // per head, 1 x out
    Tensor bias;                     // 1 x (out * heads) when concatenating, else 1 x out
    bool concat_heads = true;
    double slope = 0.2;

    GatLayer() = default;
    GatLayer(Index in, Index out, int heads, bool concat_heads, double slope, Rng& rng);
    int heads() const { return static_cast<int>(source.size()); }
    Index output_dim() const;
    /// `attention_out`, when non-null, receives per-head weights in
    /// neighbors_with_self member order.
    Tensor forward(const Tensor& h, const GraphStructure& s,
                   std::vector<std::vector<double>>* attention_out = nullptr) const;
};

struct GinLayer {
    Tensor epsilon;  // 1 x 1, starts at 0
    nn::Linear first, second;

    GinLayer() = default;
    GinLayer(Index in, Index out, Rng& rng);
    /// MLP((1 + eps) h_v + sum of neighbour h_u).
    Tensor forward(const Tensor& h, const GraphStructure& s) const;
    /// The pre-MLP aggregate, exposed for tests.
    Tensor aggregate(const Tensor& h, const GraphStructure& s) const;
};

/// Stack of GNN layers followed by a linear 2-logit head.
class GnnModel {
public:
    GnnModel(const GnnConfig& config, Index input_dim);

    /// Logits for every node. Dropout is active only when `training`;
    /// GraphSAGE needs `sampled` neighbourhoods (one Segments per layer).
    Tensor forward(const Tensor& x, const GraphStructure& s, bool training, Rng& rng,
                   const std::vector<Segments>* sampled = nullptr) const;

    const GnnConfig& config() const { return config_; }
    nn::NamedParams params() const;

    std::vector<GcnLayer> gcn;
    std::vector<SageLayer> sage;
    std::vector<GatLayer> gat;
    std::vector<GinLayer> gin;
    nn::Linear head;

private:
    GnnConfig config_;
};

struct TrainedGnn {
    GnnModel model;
    std::vector<nn::TrainLogRow> log;
};

struct GnnTrainInputs {
    const Matrix* features = nullptr;           // num_nodes x input_dim
    const GraphStructure* structure = nullptr;
    std::vector<int> labels;                    // 1 illicit, 0 otherwise
    std::vector<NodeId> train_rows;             // labelled training nodes
    std::vector<NodeId> validation_rows;        // optional
};

/// Full-batch Adam training on the masked cross-entropy of `train_rows`.
/// Throws std::runtime_error with the epoch number if the loss turns
/// non-finite.
TrainedGnn train_gnn(const GnnConfig& config, const GnnTrainInputs& inputs);

/// Illicit-class probability per node (dropout off; GraphSAGE uses a fixed
/// evaluation sample derived from the config seed).
std::vector<double> predict(const GnnModel& model, const Matrix& features, const GraphStructure& s);

}  // namespace amlbench::gnn
