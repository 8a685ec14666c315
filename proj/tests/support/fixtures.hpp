#pragma once

// Small graphs and brute-force centrality oracles for the feature tests.

#include "amlbench/graph.hpp"
#include "amlbench/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <set>
#include <vector>

namespace amlbench::testing {

using EdgeList = std::vector<std::pair<NodeId, NodeId>>;

inline TransactionGraph undirected(std::size_t n, const EdgeList& edges) {
    return undirected_view(TransactionGraph::from_edges(n, edges));
}

/// Node 0 is the hub of `leaves` spokes.
inline TransactionGraph star_graph(std::size_t leaves) {
    EdgeList e;
    for (std::size_t i = 1; i <= leaves; ++i) e.emplace_back(0, static_cast<NodeId>(i));
    return undirected(leaves + 1, e);
}

inline TransactionGraph path_graph(std::size_t n) {
    EdgeList e;
    for (std::size_t i = 0; i + 1 < n; ++i) e.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(i + 1));
    return undirected(n, e);
}

/// Simple directed graph, each ordered pair present with probability p.
inline TransactionGraph random_directed(Rng& rng, std::size_t n, double p) {
    EdgeList e;
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = 0; v < n; ++v)
            if (u != v && rng.uniform() < p) e.emplace_back(u, v);
    return TransactionGraph::from_edges(n, e);
}

inline TransactionGraph random_undirected(Rng& rng, std::size_t n, double p) {
    EdgeList e;
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v)
            if (rng.uniform() < p) e.emplace_back(u, v);
    return undirected(n, e);
}

/// Random spanning tree plus G(n, p) edges.
inline TransactionGraph random_connected(Rng& rng, std::size_t n, double p) {
    EdgeList e;
    for (NodeId v = 1; v < n; ++v) e.emplace_back(static_cast<NodeId>(rng.index(v)), v);
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v)
            if (rng.uniform() < p) e.emplace_back(u, v);
    return undirected(n, e);
}

inline double brute_egonet_density(const TransactionGraph& g, NodeId v) {
    std::vector<NodeId> ego(g.neighbors(v).begin(), g.neighbors(v).end());
    if (ego.empty()) return 0.0;
    ego.push_back(v);
    std::size_t edges = 0;
    for (std::size_t i = 0; i < ego.size(); ++i)
        for (std::size_t j = i + 1; j < ego.size(); ++j) edges += g.has_edge(ego[i], ego[j]);
    const double k = static_cast<double>(ego.size());
    return static_cast<double>(edges) / (k * (k - 1) / 2);
}

struct AllPairs {
    std::vector<std::vector<double>> dist;   // infinity when unreachable
    std::vector<std::vector<double>> sigma;  // number of shortest paths
};

/// Floyd-Warshall with shortest-path counts.
inline AllPairs all_pairs(const TransactionGraph& g) {
    const std::size_t n = g.num_nodes();
    const double inf = std::numeric_limits<double>::infinity();
    AllPairs a{std::vector<std::vector<double>>(n, std::vector<double>(n, inf)),
               std::vector<std::vector<double>>(n, std::vector<double>(n, 0.0))};
    for (NodeId v = 0; v < n; ++v) {
        a.dist[v][v] = 0;
        a.sigma[v][v] = 1;
        for (NodeId w : g.neighbors(v)) {
            a.dist[v][w] = 1;
            a.sigma[v][w] = 1;
        }
    }
    for (NodeId k = 0; k < n; ++k)
        for (NodeId i = 0; i < n; ++i)
            for (NodeId j = 0; j < n; ++j) {
                if (i == k || j == k || i == j) continue;
                const double via = a.dist[i][k] + a.dist[k][j];
                if (via < a.dist[i][j]) {
                    a.dist[i][j] = via;
                    a.sigma[i][j] = a.sigma[i][k] * a.sigma[k][j];
                } else if (via == a.dist[i][j] && std::isfinite(via)) {
                    a.sigma[i][j] += a.sigma[i][k] * a.sigma[k][j];
                }
            }
    return a;
}

/// Betweenness from path counts, normalised by (n-1)(n-2)/2.
inline std::vector<double> brute_betweenness(const TransactionGraph& g) {
    const std::size_t n = g.num_nodes();
    const auto a = all_pairs(g);
    std::vector<double> b(n, 0.0);
    for (NodeId s = 0; s < n; ++s)
        for (NodeId t = s + 1; t < n; ++t) {
            if (!std::isfinite(a.dist[s][t])) continue;
            for (NodeId v = 0; v < n; ++v)
                if (v != s && v != t && a.dist[s][v] + a.dist[v][t] == a.dist[s][t])
                    b[v] += a.sigma[s][v] * a.sigma[v][t] / a.sigma[s][t];
        }
    if (n > 2)
        for (double& x : b) x /= static_cast<double>((n - 1) * (n - 2)) / 2.0;
    return b;
}

inline std::vector<double> brute_closeness(const TransactionGraph& g) {
    const std::size_t n = g.num_nodes();
    const auto a = all_pairs(g);
    std::vector<double> c(n, 0.0);
    for (NodeId v = 0; v < n; ++v) {
        double r = 0, total = 0;
        for (NodeId w = 0; w < n; ++w)
            if (std::isfinite(a.dist[v][w])) {
                r += 1;
                total += a.dist[v][w];
            }
        if (total > 0) c[v] = (r - 1) / total * (r - 1) / static_cast<double>(n - 1);
    }
    return c;
}

/// Unit-norm, non-negative dominant eigenvector of the adjacency matrix.
inline std::vector<double> dense_dominant_eigenvector(const TransactionGraph& g) {
    const auto n = static_cast<Eigen::Index>(g.num_nodes());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (NodeId v = 0; v < g.num_nodes(); ++v)
        for (NodeId w : g.neighbors(v)) a(v, w) = 1.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    Eigen::VectorXd x = es.eigenvectors().col(n - 1);
    if (x.sum() < 0) x = -x;
    x /= x.norm();
    return {x.data(), x.data() + n};
}

/// PageRank by a direct linear solve with uniform dangling redistribution.
inline std::vector<double> dense_pagerank(const TransactionGraph& g, double alpha) {
    const auto n = static_cast<Eigen::Index>(g.num_nodes());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
        const auto out = g.out_neighbors(u);
        if (out.empty())
            t.col(u).setConstant(1.0 / static_cast<double>(n));
        else
            for (NodeId v : out) t(v, u) += 1.0 / static_cast<double>(out.size());
    }
    const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) - alpha * t;
    const Eigen::VectorXd rhs = Eigen::VectorXd::Constant(n, (1.0 - alpha) / static_cast<double>(n));
    const Eigen::VectorXd x = m.partialPivLu().solve(rhs);
    return {x.data(), x.data() + n};
}

}  // namespace amlbench::testing
