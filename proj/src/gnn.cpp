#include "amlbench/gnn.hpp"

#include "amlbench/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace amlbench::gnn {

const char* to_string(Architecture arch) {
    switch (arch) {
        case Architecture::Gcn: return "gcn";
        case Architecture::Sage: return "graphsage";
        case Architecture::Gat: return "gat";
        case Architecture::Gin: return "gin";
    }
    return "?";
}

std::optional<Architecture> parse_architecture(const std::string& name) {
    if (name == "gcn") return Architecture::Gcn;
    if (name == "graphsage" || name == "sage") return Architecture::Sage;
    if (name == "gat" || name == "gatv2") return Architecture::Gat;
    if (name == "gin") return Architecture::Gin;
    return std::nullopt;
}

const char* to_string(Reduce aggregator) {
    switch (aggregator) {
        case Reduce::Sum: return "sum";
        case Reduce::Mean: return "mean";
        case Reduce::Max: return "max";
        case Reduce::Min: return "min";
    }
    return "?";
}

std::optional<Reduce> parse_aggregator(const std::string& name) {
    if (name == "min") return Reduce::Min;
    if (name == "mean") return Reduce::Mean;
    if (name == "max") return Reduce::Max;
    if (name == "sum") return Reduce::Sum;
    return std::nullopt;
}

GnnConfig tuned_config(Architecture arch) {
    GnnConfig c;
    c.architecture = arch;
    switch (arch) {
        case Architecture::Gcn:
            c.latent_dim = 87;
            c.hidden_dim = 217;
            c.layers = 3;
            c.dropout = 0.057;
            c.learning_rate = 0.0864;
            c.epochs = 174;
            break;
        case Architecture::Sage:
            c.latent_dim = 77;
            c.hidden_dim = 192;
            c.layers = 1;
            c.sample_size = 2;
            c.aggregator = Reduce::Max;
            c.dropout = 0.345;
            c.learning_rate = 0.0690;
            c.epochs = 494;
            break;
        case Architecture::Gat:
            c.latent_dim = 104;
            c.layers = 1;
            c.heads = 1;
            c.dropout = 0.471;
            c.learning_rate = 0.0487;
            c.epochs = 282;
            break;
        case Architecture::Gin:
            c.latent_dim = 98;
            c.layers = 1;
            c.dropout = 0.384;
            c.learning_rate = 0.0452;
            c.epochs = 42;
            break;
    }
    return c;
}

int layer_output_dim(const GnnConfig& c, int l) {
    const bool uses_hidden = c.architecture == Architecture::Gcn || c.architecture == Architecture::Sage;
    return (uses_hidden && l + 1 < c.layers) ? c.hidden_dim : c.latent_dim;
}

double GraphStructure::gcn_coefficient(NodeId i, NodeId j) const { return gcn_operator->forward.coeff(i, j); }

GraphStructure build_structure(const TransactionGraph& graph, bool directed_mp) {
    const std::size_t n = graph.num_nodes();
    GraphStructure s;
    s.num_nodes = n;
    std::vector<std::vector<NodeId>> lists(n);
    if (directed_mp && !graph.undirected()) {
        for (NodeId v = 0; v < n; ++v)
            for (NodeId u : graph.in_neighbors(v))
                if (u != v) lists[v].push_back(u);
        for (auto& l : lists) {
            std::sort(l.begin(), l.end());
            l.erase(std::unique(l.begin(), l.end()), l.end());
        }
    } else {
        const TransactionGraph und = graph.undirected() ? graph : undirected_view(graph);
        for (NodeId v = 0; v < n; ++v) {
            const auto nb = und.neighbors(v);
            lists[v].assign(nb.begin(), nb.end());
        }
    }
    for (NodeId v = 0; v < n; ++v) {
        s.neighbors.members.insert(s.neighbors.members.end(), lists[v].begin(), lists[v].end());
        s.neighbors.offsets.push_back(s.neighbors.members.size());
        s.neighbors_with_self.members.push_back(v);
        s.neighbors_with_self.members.insert(s.neighbors_with_self.members.end(), lists[v].begin(), lists[v].end());
        s.neighbors_with_self.offsets.push_back(s.neighbors_with_self.members.size());
    }

    // deg~ counts the self-loop. For directed messages the receiving side's
    // in-degree is used on both ends, matching the usual source/target
    // normalisation on the transposed adjacency.
    std::vector<double> deg(n);
    for (NodeId v = 0; v < n; ++v) deg[v] = static_cast<double>(lists[v].size() + 1);
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(s.neighbors_with_self.members.size());
    for (NodeId i = 0; i < n; ++i)
        for (std::size_t k = s.neighbors_with_self.offsets[i]; k < s.neighbors_with_self.offsets[i + 1]; ++k) {
            const NodeId j = s.neighbors_with_self.members[k];
            entries.emplace_back(i, j, 1.0 / std::sqrt(deg[i] * deg[j]));
        }
    s.gcn_operator = nn::SparseOperator::from_triplets(static_cast<Index>(n), static_cast<Index>(n), entries);
    return s;
}

Segments sample_neighbors(const Segments& neighbors, int sample_size, Rng& rng) {
    if (sample_size < 1) throw std::invalid_argument("sample_size must be >= 1");
    Segments out;
    out.offsets.reserve(neighbors.offsets.size());
    std::vector<NodeId> pool;
    const auto k = static_cast<std::size_t>(sample_size);
    for (std::size_t v = 0; v < neighbors.count(); ++v) {
        const std::size_t b = neighbors.offsets[v], e = neighbors.offsets[v + 1];
        if (e - b <= k) {
            out.members.insert(out.members.end(), neighbors.members.begin() + static_cast<std::ptrdiff_t>(b),
                               neighbors.members.begin() + static_cast<std::ptrdiff_t>(e));
        } else {
            pool.assign(neighbors.members.begin() + static_cast<std::ptrdiff_t>(b),
                        neighbors.members.begin() + static_cast<std::ptrdiff_t>(e));
            for (std::size_t i = 0; i < k; ++i) {
                std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
                out.members.push_back(pool[i]);
            }
        }
        out.offsets.push_back(out.members.size());
    }
    return out;
}

GcnLayer::GcnLayer(Index in, Index out, Rng& rng) : linear(in, out, rng) {}

Tensor GcnLayer::forward(const Tensor& h, const GraphStructure& s) const {
    if (h.rows() != static_cast<Index>(s.num_nodes)) throw std::invalid_argument("gcn: row count != num_nodes");
    if (h.cols() != linear.in_dim()) throw std::invalid_argument("gcn: feature width mismatch");
    return nn::add_row(nn::spmm(s.gcn_operator, nn::matmul(h, linear.weight)), linear.bias);
}

SageLayer::SageLayer(Index in, Index out, Reduce agg, Rng& rng) : linear(2 * in, out, rng), aggregator(agg) {}

Tensor SageLayer::forward(const Tensor& h, const Segments& sampled) const {
    if (static_cast<Index>(sampled.count()) != h.rows()) throw std::invalid_argument("sage: row count mismatch");
    if (2 * h.cols() != linear.in_dim()) throw std::invalid_argument("sage: feature width mismatch");
    const Tensor agg = nn::segment_reduce(h, sampled, aggregator);
    const Tensor parts[] = {h, agg};
    return linear(nn::concat_cols(parts));
}

GatLayer::GatLayer(Index in, Index out, int heads, bool concat, double slope_, Rng& rng)
    : concat_heads(concat), slope(slope_) {
    if (heads < 1) throw std::invalid_argument("gat: heads must be >= 1");
    for (int k = 0; k < heads; ++k) {
        source.emplace_back(in, out, rng, false);
        target.emplace_back(in, out, rng, false);
        attention.push_back(Tensor::parameter(nn::glorot_uniform(1, out, rng)));
    }
    bias = Tensor::parameter(Matrix::Zero(1, concat ? out * heads : out));
}

Index GatLayer::output_dim() const {
    const Index per_head = source.front().out_dim();
    return concat_heads ? per_head * heads() : per_head;
}

Tensor GatLayer::forward(const Tensor& h, const GraphStructure& s,
                         std::vector<std::vector<double>>* attention_out) const {
    if (h.rows() != static_cast<Index>(s.num_nodes)) throw std::invalid_argument("gat: row count != num_nodes");
    if (h.cols() != source.front().in_dim()) throw std::invalid_argument("gat: feature width mismatch");
    std::vector<Tensor> outs;
    if (attention_out) attention_out->assign(source.size(), {});
    for (std::size_t k = 0; k < source.size(); ++k) {
        outs.push_back(nn::gatv2_attention(source[k](h), target[k](h), attention[k], s.neighbors_with_self, slope,
                                           attention_out ? &(*attention_out)[k] : nullptr));
    }
    const Tensor combined = outs.size() == 1 ? outs.front() : concat_heads ? nn::concat_cols(outs) : nn::average(outs);
    return nn::add_row(combined, bias);
}

GinLayer::GinLayer(Index in, Index out, Rng& rng)
    : epsilon(Tensor::scalar(0.0, true)), first(in, out, rng), second(out, out, rng) {}

Tensor GinLayer::aggregate(const Tensor& h, const GraphStructure& s) const {
    if (h.rows() != static_cast<Index>(s.num_nodes)) throw std::invalid_argument("gin: row count != num_nodes");
    return nn::add(nn::add(h, nn::scale_by(h, epsilon)), nn::segment_reduce(h, s.neighbors, Reduce::Sum));
}

Tensor GinLayer::forward(const Tensor& h, const GraphStructure& s) const {
    if (h.cols() != first.in_dim()) throw std::invalid_argument("gin: feature width mismatch");
    return second(nn::relu(first(aggregate(h, s))));
}

GnnModel::GnnModel(const GnnConfig& c, Index input_dim) : config_(c) {
    if (c.layers < 1) throw std::invalid_argument("GNN needs at least one layer");
    Rng rng(derive_seed(c.seed, {hash_name("gnn-init"), hash_name(to_string(c.architecture))}));
    Index in = input_dim;
    for (int l = 0; l < c.layers; ++l) {
        const Index out = layer_output_dim(c, l);
        switch (c.architecture) {
            case Architecture::Gcn: gcn.emplace_back(in, out, rng); in = out; break;
            case Architecture::Sage: sage.emplace_back(in, out, c.aggregator, rng); in = out; break;
            case Architecture::Gat: {
                const bool last = l + 1 == c.layers;
                gat.emplace_back(in, out, c.heads, !last, c.attention_slope, rng);
                in = gat.back().output_dim();
                break;
            }
            case Architecture::Gin: gin.emplace_back(in, out, rng); in = out; break;
        }
    }
    head = nn::Linear(in, 2, rng);
}

Tensor GnnModel::forward(const Tensor& x, const GraphStructure& s, bool training, Rng& rng,
                         const std::vector<Segments>* sampled) const {
    if (config_.architecture == Architecture::Sage && (!sampled || sampled->size() < sage.size()))
        throw std::invalid_argument("GraphSAGE forward needs one neighbour sample per layer");
    Tensor h = x;
    for (int l = 0; l < config_.layers; ++l) {
        const auto li = static_cast<std::size_t>(l);
        switch (config_.architecture) {
            case Architecture::Gcn: h = gcn[li].forward(h, s); break;
            case Architecture::Sage: h = sage[li].forward(h, (*sampled)[li]); break;
            case Architecture::Gat: h = gat[li].forward(h, s); break;
            case Architecture::Gin: h = gin[li].forward(h, s); break;
        }
        h = nn::relu(h);
        h = nn::dropout(h, config_.dropout, rng, training);
    }
    return head(h);
}

nn::NamedParams GnnModel::params() const {
    nn::NamedParams out;
    for (std::size_t l = 0; l < gcn.size(); ++l) gcn[l].linear.append_params("gcn." + std::to_string(l), out);
    for (std::size_t l = 0; l < sage.size(); ++l) sage[l].linear.append_params("sage." + std::to_string(l), out);
    for (std::size_t l = 0; l < gat.size(); ++l) {
        const std::string p = "gat." + std::to_string(l);
        for (std::size_t k = 0; k < gat[l].source.size(); ++k) {
            const std::string hp = p + ".head" + std::to_string(k);
            gat[l].source[k].append_params(hp + ".source", out);
            gat[l].target[k].append_params(hp + ".target", out);
            out.emplace_back(hp + ".attention", gat[l].attention[k]);
        }
        out.emplace_back(p + ".bias", gat[l].bias);
    }
    for (std::size_t l = 0; l < gin.size(); ++l) {
        const std::string p = "gin." + std::to_string(l);
        out.emplace_back(p + ".epsilon", gin[l].epsilon);
        gin[l].first.append_params(p + ".mlp0", out);
        gin[l].second.append_params(p + ".mlp1", out);
    }
    head.append_params("head", out);
    return out;
}

namespace {

std::vector<Segments> draw_samples(const GnnModel& model, const GraphStructure& s, Rng& rng) {
    std::vector<Segments> out;
    if (model.config().architecture != Architecture::Sage) return out;
    for (int l = 0; l < model.config().layers; ++l)
        out.push_back(sample_neighbors(s.neighbors, model.config().sample_size, rng));
    return out;
}

}  // namespace

TrainedGnn train_gnn(const GnnConfig& config, const GnnTrainInputs& in) {
    if (!in.features || !in.structure) throw std::invalid_argument("train_gnn: features and structure are required");
    const Matrix& features = *in.features;
    if (static_cast<std::size_t>(features.rows()) != in.structure->num_nodes)
        throw std::invalid_argument("train_gnn: feature rows != num_nodes");
    if (in.labels.size() != in.structure->num_nodes) throw std::invalid_argument("train_gnn: label count mismatch");
    if (in.train_rows.empty()) throw std::invalid_argument("train_gnn: no labelled training nodes");

    TrainedGnn result{GnnModel(config, features.cols()), {}};
    const GnnModel& model = result.model;
    std::vector<Tensor> params;
    for (auto& [_, t] : model.params()) params.push_back(t);
    nn::Adam adam(params, {.lr = config.learning_rate});
    const std::vector<double> weights =
        config.class_weighting ? nn::inverse_prevalence_weights(in.labels, in.train_rows) : std::vector<double>{};
    const Tensor x = Tensor::constant(features);
    const bool has_val = !in.validation_rows.empty() &&
                         std::any_of(in.validation_rows.begin(), in.validation_rows.end(),
                                     [&](NodeId r) { return in.labels[r] == 1; });

    result.log.reserve(static_cast<std::size_t>(config.epochs));
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng rng(derive_seed(config.seed, {hash_name("gnn-epoch"), static_cast<std::uint64_t>(epoch)}));
        const auto samples = draw_samples(model, *in.structure, rng);
        adam.zero_grad();
        const Tensor logits = model.forward(x, *in.structure, true, rng, &samples);
        const Tensor loss = nn::masked_cross_entropy(logits, in.labels, in.train_rows, weights);
        if (!std::isfinite(loss.item()))
            throw std::runtime_error(std::string(to_string(config.architecture)) + " training loss is non-finite at epoch " +
                                     std::to_string(epoch));
        loss.backward();
        adam.step();

        nn::TrainLogRow row{epoch, loss.item(), 0.0, 0.0};
        if (!in.validation_rows.empty()) {
            Rng eval_rng(derive_seed(config.seed, {hash_name("gnn-eval")}));
            const auto eval_samples = draw_samples(model, *in.structure, eval_rng);
            const Tensor eval_logits = model.forward(x, *in.structure, false, eval_rng, &eval_samples);
            row.val_loss = nn::masked_cross_entropy(eval_logits, in.labels, in.validation_rows, weights).item();
            if (has_val) {
                const auto probs = nn::positive_class_probability(eval_logits.value());
                std::vector<ScoredNode> scored;
                scored.reserve(in.validation_rows.size());
                for (NodeId r : in.validation_rows) scored.push_back({r, probs[r], in.labels[r] == 1});
                row.val_auc_pr = auc_pr(scored);
            }
        }
        result.log.push_back(row);
    }
    return result;
}

std::vector<double> predict(const GnnModel& model, const Matrix& features, const GraphStructure& s) {
    Rng rng(derive_seed(model.config().seed, {hash_name("gnn-eval")}));
    const auto samples = draw_samples(model, s, rng);
    const Tensor logits = model.forward(Tensor::constant(features), s, false, rng, &samples);
    return nn::positive_class_probability(logits.value());
}

}  // namespace amlbench::gnn
