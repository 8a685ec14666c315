#pragma once

#include "amlbench/graph.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace amlbench {

/// A power iteration that ran out of iterations before reaching tolerance.
class NonConvergence : public std::runtime_error {
public:
    NonConvergence(const std::string& what, int iterations, double residual)
        : std::runtime_error(what), iterations_(iterations), residual_(residual) {}
    int iterations() const { return iterations_; }
    double residual() const { return residual_; }

private:
    int iterations_;
    double residual_;
};

/// Egonet edge count over n_ego(n_ego-1)/2 with n_ego = 1 + degree; 0 for
/// isolated nodes. Expects the undirected view.
double egonet_density(const TransactionGraph& undirected, NodeId node);
std::vector<double> egonet_densities(const TransactionGraph& undirected);

struct NeighborDensityStats {
    std::vector<double> min, mean, max;
};

/// Min/mean/max of the neighbors' densities; all zero for isolated nodes.
NeighborDensityStats neighbor_density_stats(const TransactionGraph& undirected,
                                            std::span<const double> densities);

/// Betweenness normalised by (n-1)(n-2)/2. `sample_count` >= n (or 0) runs
/// exact Brandes; otherwise that many pivots are drawn without replacement
/// and the accumulated dependencies are scaled by n / sample_count.
std::vector<double> betweenness(const TransactionGraph& undirected, std::size_t sample_count,
                                std::uint64_t seed, std::size_t threads = 1);

/// Component-scaled closeness: (r-1)/sum(d) * (r-1)/(n-1), r = nodes reachable
/// from v including v. Zero for isolated nodes.
std::vector<double> closeness(const TransactionGraph& undirected, std::size_t threads = 1);

struct PowerIterationOptions {
    double tol = 1e-8;
    int max_iter = 1000;
    /// Start vector; uniform when empty.
    std::vector<double> start;
};

struct PowerIterationResult {
    std::vector<double> values;
    int iterations = 0;
};

/// Dominant eigenvector of A via iteration on A + I (same eigenvectors,
/// avoids the oscillation that plain A shows on bipartite components).
/// Stops when the L1 change drops below n * tol. Unit Euclidean norm.
PowerIterationResult eigenvector_centrality(const TransactionGraph& undirected,
                                            const PowerIterationOptions& options = {});

/// PageRank on the directed graph. `alpha` is the probability of following an
/// out-link; 1 - alpha is the uniform teleport mass. Dangling mass is spread
/// uniformly. Stops when the L1 change drops below n * tol.
PowerIterationResult pagerank(const TransactionGraph& graph, double alpha,
                              const PowerIterationOptions& options = {.tol = 1e-10,
                                                                     .max_iter = 1000,
                                                                     .start = {}});

struct ManualFeatureConfig {
    double pagerank_alpha = 0.593;
    /// 0 means exact Brandes.
    std::size_t betweenness_pivots = 2000;
    double eigenvector_tol = 1e-8;
    int eigenvector_max_iter = 1000;
    double pagerank_tol = 1e-10;
    int pagerank_max_iter = 1000;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

struct ManualFeatureSet {
    std::vector<double> density, density_min, density_mean, density_max;
    std::vector<double> betweenness, closeness, eigenvector, pagerank;

    static const std::vector<std::string>& column_names();
    std::size_t num_nodes() const { return density.size(); }
    /// num_nodes x 8 in column_names() order.
    RowMatrix as_matrix() const;
};

/// All engineered columns. Centralities and density use the undirected simple
/// view of `graph`; PageRank uses `graph` itself.
ManualFeatureSet compute_manual_features(const TransactionGraph& graph,
                                         const ManualFeatureConfig& config = {});

/// CSV with header node_id,density,...,pagerank keyed by external id.
void write_manual_features_csv(const std::filesystem::path& path, const TransactionGraph& graph,
                               const ManualFeatureSet& features);
ManualFeatureSet read_manual_features_csv(const std::filesystem::path& path,
                                          const TransactionGraph& graph);

}  // namespace amlbench
