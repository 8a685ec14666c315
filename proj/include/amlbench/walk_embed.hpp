#pragma once

#include "amlbench/graph.hpp"
#include "amlbench/random.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace amlbench {

enum class WalkMethod { DeepWalk, Node2Vec };

const char* to_string(WalkMethod method);

struct WalkConfig {
    int walks_per_node = 1;
    int walk_length = 10;
    int window = 5;
    int latent_dim = 16;
    double p = 1.0;
    double q = 1.0;
    int negatives_per_positive = 1;
    int epochs = 5;
    double learning_rate = 0.025;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

/// Tuned values for the Elliptic runs.
WalkConfig tuned_deepwalk_config();
WalkConfig tuned_node2vec_config();

using Walk = std::vector<NodeId>;

/// Uniform next-neighbor walk of at most `length` nodes, stopping early at a
/// dead end.
Walk sample_walk_deepwalk(const TransactionGraph& undirected, NodeId start, int length, Rng& rng);

/// Unnormalised second-order weights for stepping from `current` having
/// arrived from `previous`, one per neighbor of `current` in adjacency order:
/// 1/p back to `previous`, 1 to nodes adjacent to `previous`, 1/q otherwise.
std::vector<double> node2vec_weights(const TransactionGraph& undirected, NodeId previous, NodeId current,
                                     double p, double q);

/// Second-order biased walk; the first step is uniform.
Walk sample_walk_node2vec(const TransactionGraph& undirected, NodeId start, int length, double p, double q,
                          Rng& rng);

/// walks_per_node walks from every node, ordered by (walk index, node). Each
/// walk draws from its own stream derived from (seed, node, walk index), so
/// the corpus does not depend on the thread count.
std::vector<Walk> generate_walks(const TransactionGraph& undirected, WalkMethod method, const WalkConfig& config);

struct EmbeddingMatrix {
    RowMatrix values;  // num_nodes x latent_dim
    WalkMethod method = WalkMethod::DeepWalk;
};

struct SkipGramResult {
    EmbeddingMatrix embedding;
    /// Mean negative-sampling loss per (center, context) pair, one per epoch.
    std::vector<double> epoch_loss;
};

/// Skip-gram with negative sampling trained by plain SGD. Every pair within
/// `window` positions contributes log s(u.v) + sum log s(-u.v_neg), negatives
/// drawn from walk-occurrence counts raised to 3/4. The learning rate decays
/// linearly to 1e-4 of its initial value over all epochs.
SkipGramResult train_skipgram(const std::vector<Walk>& walks, std::size_t num_nodes, const WalkConfig& config,
                              WalkMethod method = WalkMethod::DeepWalk);

/// Convenience: walks + skip-gram on the undirected view of `graph`.
SkipGramResult embed_graph(const TransactionGraph& graph, WalkMethod method, const WalkConfig& config);

void write_embedding_csv(const std::filesystem::path& path, const TransactionGraph& graph,
                         const EmbeddingMatrix& embedding);
EmbeddingMatrix read_embedding_csv(const std::filesystem::path& path, const TransactionGraph& graph);

/// One walk per line, external ids separated by spaces.
void write_walks(const std::filesystem::path& path, const TransactionGraph& graph, const std::vector<Walk>& walks);

}  // namespace amlbench
