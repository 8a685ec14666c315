#include "amlbench/manual_features.hpp"

#include "amlbench/parallel.hpp"
#include "amlbench/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace amlbench {

namespace {

void require_undirected(const TransactionGraph& g, const char* fn) {
    if (!g.undirected()) throw std::invalid_argument(std::string(fn) + " expects the undirected view");
}

// Reusable BFS scratch space; only touched entries are reset between sources.
struct BfsScratch {
    std::vector<int> dist;
    std::vector<double> sigma;
    std::vector<double> delta;
    std::vector<NodeId> order;

    explicit BfsScratch(std::size_t n) : dist(n, -1), sigma(n, 0.0), delta(n, 0.0) { order.reserve(n); }

    void bfs(const TransactionGraph& g, NodeId source) {
        order.clear();
        dist[source] = 0;
        sigma[source] = 1.0;
        order.push_back(source);
        for (std::size_t head = 0; head < order.size(); ++head) {
            const NodeId v = order[head];
            for (NodeId w : g.neighbors(v)) {
                if (dist[w] < 0) {
                    dist[w] = dist[v] + 1;
                    order.push_back(w);
                }
                if (dist[w] == dist[v] + 1) sigma[w] += sigma[v];
            }
        }
    }

    void reset() {
        for (NodeId v : order) {
            dist[v] = -1;
            sigma[v] = 0.0;
            delta[v] = 0.0;
        }
    }
};

}  // namespace

double egonet_density(const TransactionGraph& g, NodeId v) {
    require_undirected(g, "egonet_density");
    const auto nbrs = g.neighbors(v);
    const std::size_t deg = nbrs.size();
    if (deg == 0) return 0.0;
    // Neighbor lists are sorted, so a merge-style intersection counts the
    // edges among neighbors without scratch memory.
    std::size_t inner = 0;
    for (NodeId u : nbrs) {
        const auto un = g.neighbors(u);
        auto a = nbrs.begin();
        auto b = un.begin();
        while (a != nbrs.end() && b != un.end()) {
            if (*a < *b) {
                ++a;
            } else if (*b < *a) {
                ++b;
            } else {
                ++inner;
                ++a;
                ++b;
            }
        }
    }
    const double edges = static_cast<double>(deg) + static_cast<double>(inner) / 2.0;
    const double n_ego = static_cast<double>(deg + 1);
    return edges / (n_ego * (n_ego - 1.0) / 2.0);
}

std::vector<double> egonet_densities(const TransactionGraph& g) {
    std::vector<double> out(g.num_nodes());
    for (NodeId v = 0; v < g.num_nodes(); ++v) out[v] = egonet_density(g, v);
    return out;
}

NeighborDensityStats neighbor_density_stats(const TransactionGraph& g, std::span<const double> densities) {
    require_undirected(g, "neighbor_density_stats");
    if (densities.size() != g.num_nodes()) throw std::invalid_argument("density vector size mismatch");
    const std::size_t n = g.num_nodes();
    NeighborDensityStats s{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                           std::vector<double>(n, 0.0)};
    for (NodeId v = 0; v < n; ++v) {
        const auto nbrs = g.neighbors(v);
        if (nbrs.empty()) continue;
        double lo = densities[nbrs[0]], hi = lo, sum = 0.0;
        for (NodeId u : nbrs) {
            lo = std::min(lo, densities[u]);
            hi = std::max(hi, densities[u]);
            sum += densities[u];
        }
        s.min[v] = lo;
        s.mean[v] = sum / static_cast<double>(nbrs.size());
        s.max[v] = hi;
    }
    return s;
}

std::vector<double> betweenness(const TransactionGraph& g, std::size_t sample_count, std::uint64_t seed,
                                std::size_t threads) {
    require_undirected(g, "betweenness");
    const std::size_t n = g.num_nodes();
    std::vector<double> result(n, 0.0);
    if (n < 3) return result;

    std::vector<NodeId> pivots(n);
    std::iota(pivots.begin(), pivots.end(), NodeId{0});
    const bool exact = sample_count == 0 || sample_count >= n;
    if (!exact) {
        Rng rng(derive_seed(seed, {hash_name("betweenness")}));
        for (std::size_t i = 0; i < sample_count; ++i)
            std::swap(pivots[i], pivots[i + rng.index(n - i)]);
        pivots.resize(sample_count);
        std::sort(pivots.begin(), pivots.end());
    }

    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, pivots.size()));
    std::vector<std::vector<double>> partial(workers, std::vector<double>(n, 0.0));
    parallel_chunks(pivots.size(), workers, [&](std::size_t begin, std::size_t end, std::size_t w) {
        BfsScratch s(n);
        auto& acc = partial[w];
        for (std::size_t i = begin; i < end; ++i) {
            const NodeId source = pivots[i];
            s.bfs(g, source);
            for (std::size_t k = s.order.size(); k-- > 1;) {
                const NodeId x = s.order[k];
                const double coeff = (1.0 + s.delta[x]) / s.sigma[x];
                for (NodeId v : g.neighbors(x))
                    if (s.dist[v] == s.dist[x] - 1) s.delta[v] += s.sigma[v] * coeff;
                acc[x] += s.delta[x];
            }
            s.reset();
        }
    });
    for (const auto& acc : partial)
        for (std::size_t v = 0; v < n; ++v) result[v] += acc[v];

    // Every unordered pair is seen from both endpoints in the exact sum.
    const double scale = (exact ? 1.0 : static_cast<double>(n) / static_cast<double>(pivots.size())) /
                         (static_cast<double>(n - 1) * static_cast<double>(n - 2));
    for (double& x : result) x *= scale;
    return result;
}

std::vector<double> closeness(const TransactionGraph& g, std::size_t threads) {
    require_undirected(g, "closeness");
    const std::size_t n = g.num_nodes();
    std::vector<double> result(n, 0.0);
    if (n < 2) return result;
    parallel_chunks(n, threads, [&](std::size_t begin, std::size_t end, std::size_t) {
        std::vector<int> dist(n, -1);
        std::vector<NodeId> order;
        order.reserve(n);
        for (std::size_t src = begin; src < end; ++src) {
            order.clear();
            dist[src] = 0;
            order.push_back(static_cast<NodeId>(src));
            double total = 0.0;
            for (std::size_t head = 0; head < order.size(); ++head) {
                const NodeId v = order[head];
                total += dist[v];
                for (NodeId w : g.neighbors(v)) {
                    if (dist[w] < 0) {
                        dist[w] = dist[v] + 1;
                        order.push_back(w);
                    }
                }
            }
            const double reach = static_cast<double>(order.size() - 1);
            if (total > 0.0) result[src] = (reach / total) * (reach / static_cast<double>(n - 1));
            for (NodeId v : order) dist[v] = -1;
        }
    });
    return result;
}

namespace {

std::vector<double> start_vector(std::size_t n, const std::vector<double>& start) {
    if (start.empty()) return std::vector<double>(n, 1.0 / static_cast<double>(n));
    if (start.size() != n) throw std::invalid_argument("start vector size mismatch");
    return start;
}

}  // namespace

PowerIterationResult eigenvector_centrality(const TransactionGraph& g, const PowerIterationOptions& opt) {
    require_undirected(g, "eigenvector_centrality");
    if (!(opt.tol > 0.0)) throw std::invalid_argument("tol must be positive");
    const std::size_t n = g.num_nodes();
    PowerIterationResult r;
    if (n == 0) return r;
    std::vector<double> x = start_vector(n, opt.start);
    {
        const double s = std::accumulate(x.begin(), x.end(), 0.0);
        if (!(s > 0.0)) throw std::invalid_argument("start vector must have positive mass");
    }
    std::vector<double> next(n);
    double change = 0.0;
    for (int it = 1; it <= opt.max_iter; ++it) {
        for (NodeId v = 0; v < n; ++v) {
            double acc = x[v];
            for (NodeId u : g.neighbors(v)) acc += x[u];
            next[v] = acc;
        }
        double norm = 0.0;
        for (double y : next) norm += y * y;
        norm = std::sqrt(norm);
        if (norm == 0.0) norm = 1.0;
        change = 0.0;
        for (std::size_t v = 0; v < n; ++v) {
            next[v] /= norm;
            change += std::abs(next[v] - x[v]);
        }
        x.swap(next);
        if (change < static_cast<double>(n) * opt.tol) {
            r.values = std::move(x);
            r.iterations = it;
            return r;
        }
    }
    throw NonConvergence("eigenvector centrality did not converge in " + std::to_string(opt.max_iter) +
                             " iterations (raise eigenvector_max_iter)",
                         opt.max_iter, change);
}

PowerIterationResult pagerank(const TransactionGraph& g, double alpha, const PowerIterationOptions& opt) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in [0, 1)");
    if (!(opt.tol > 0.0)) throw std::invalid_argument("tol must be positive");
    const std::size_t n = g.num_nodes();
    PowerIterationResult r;
    if (n == 0) return r;
    std::vector<double> x = start_vector(n, opt.start);
    {
        const double s = std::accumulate(x.begin(), x.end(), 0.0);
        if (!(s > 0.0)) throw std::invalid_argument("start vector must have positive mass");
        for (double& v : x) v /= s;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> next(n);
    double change = 0.0;
    for (int it = 1; it <= opt.max_iter; ++it) {
        double dangling = 0.0;
        for (NodeId v = 0; v < n; ++v)
            if (g.out_degree(v) == 0) dangling += x[v];
        const double base = (1.0 - alpha) * inv_n + alpha * dangling * inv_n;
        for (NodeId v = 0; v < n; ++v) {
            double acc = 0.0;
            for (NodeId u : g.in_neighbors(v)) acc += x[u] / static_cast<double>(g.out_degree(u));
            next[v] = base + alpha * acc;
        }
        const double total = std::accumulate(next.begin(), next.end(), 0.0);
        change = 0.0;
        for (std::size_t v = 0; v < n; ++v) {
            next[v] /= total;
            change += std::abs(next[v] - x[v]);
        }
        x.swap(next);
        if (change < static_cast<double>(n) * opt.tol) {
            r.values = std::move(x);
            r.iterations = it;
            return r;
        }
    }
    throw NonConvergence("pagerank did not converge in " + std::to_string(opt.max_iter) + " iterations",
                         opt.max_iter, change);
}

const std::vector<std::string>& ManualFeatureSet::column_names() {
    static const std::vector<std::string> names{"density",     "density_min", "density_mean",
                                                "density_max", "betweenness", "closeness",
                                                "eigenvector", "pagerank"};
    return names;
}

RowMatrix ManualFeatureSet::as_matrix() const {
    const std::size_t n = num_nodes();
    RowMatrix m(static_cast<Eigen::Index>(n), 8);
    const std::vector<double>* cols[] = {&density,     &density_min, &density_mean, &density_max,
                                         &betweenness, &closeness,   &eigenvector,  &pagerank};
    for (std::size_t c = 0; c < 8; ++c)
        for (std::size_t v = 0; v < n; ++v) m(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(c)) = (*cols[c])[v];
    return m;
}

ManualFeatureSet compute_manual_features(const TransactionGraph& graph, const ManualFeatureConfig& cfg) {
    const TransactionGraph und = graph.undirected() ? graph : undirected_view(graph);
    ManualFeatureSet f;
    f.density = egonet_densities(und);
    auto stats = neighbor_density_stats(und, f.density);
    f.density_min = std::move(stats.min);
    f.density_mean = std::move(stats.mean);
    f.density_max = std::move(stats.max);
    f.betweenness = betweenness(und, cfg.betweenness_pivots, cfg.seed, cfg.threads);
    f.closeness = closeness(und, cfg.threads);
    f.eigenvector =
        eigenvector_centrality(und, {.tol = cfg.eigenvector_tol, .max_iter = cfg.eigenvector_max_iter, .start = {}})
            .values;
    f.pagerank =
        pagerank(graph, cfg.pagerank_alpha, {.tol = cfg.pagerank_tol, .max_iter = cfg.pagerank_max_iter, .start = {}})
            .values;
    return f;
}

void write_manual_features_csv(const std::filesystem::path& path, const TransactionGraph& graph,
                               const ManualFeatureSet& f) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "node_id";
    for (const auto& name : ManualFeatureSet::column_names()) out << ',' << name;
    out << '\n' << std::setprecision(17);
    const RowMatrix m = f.as_matrix();
    for (Eigen::Index v = 0; v < m.rows(); ++v) {
        out << graph.external_id(static_cast<NodeId>(v));
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << m(v, c);
        out << '\n';
    }
}

ManualFeatureSet read_manual_features_csv(const std::filesystem::path& path, const TransactionGraph& graph) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    const std::size_t n = graph.num_nodes();
    ManualFeatureSet f;
    std::vector<double>* cols[] = {&f.density,     &f.density_min, &f.density_mean, &f.density_max,
                                   &f.betweenness, &f.closeness,   &f.eigenvector,  &f.pagerank};
    for (auto* c : cols) c->assign(n, 0.0);
    std::vector<std::uint8_t> seen(n, 0);
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (row == 1) continue;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        const auto idx = graph.dense_index(std::stoll(cell));
        if (!idx) throw DataError(path.filename().string() + ": unknown node id " + cell, row);
        for (auto* c : cols) {
            if (!std::getline(ss, cell, ',')) throw DataError(path.filename().string() + ": short row", row);
            (*c)[*idx] = std::stod(cell);
        }
        seen[*idx] = 1;
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw DataError(path.filename().string() + ": missing rows for some nodes");
    return f;
}

}  // namespace amlbench
