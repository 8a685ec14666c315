#include "amlbench/walk_embed.hpp"

#include "amlbench/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace amlbench {

const char* to_string(WalkMethod method) {
    return method == WalkMethod::DeepWalk ? "deepwalk" : "node2vec";
}

WalkConfig tuned_deepwalk_config() {
    WalkConfig c;
    c.walks_per_node = 2;
    c.walk_length = 3;
    c.window = 2;
    c.latent_dim = 5;
    c.negatives_per_positive = 1;
    c.epochs = 176;
    c.learning_rate = 0.0554;
    return c;
}

WalkConfig tuned_node2vec_config() {
    WalkConfig c;
    c.walks_per_node = 1;
    c.walk_length = 9;
    c.window = 5;
    c.latent_dim = 47;
    c.p = 1.17;
    c.q = 1.60;
    c.negatives_per_positive = 1;
    c.epochs = 222;
    c.learning_rate = 0.0159;
    return c;
}

Walk sample_walk_deepwalk(const TransactionGraph& g, NodeId start, int length, Rng& rng) {
    if (length < 1) throw std::invalid_argument("walk length must be >= 1");
    Walk walk{start};
    walk.reserve(static_cast<std::size_t>(length));
    while (static_cast<int>(walk.size()) < length) {
        const auto nbrs = g.neighbors(walk.back());
        if (nbrs.empty()) break;
        walk.push_back(nbrs[rng.index(nbrs.size())]);
    }
    return walk;
}

std::vector<double> node2vec_weights(const TransactionGraph& g, NodeId previous, NodeId current, double p,
                                     double q) {
    const auto nbrs = g.neighbors(current);
    std::vector<double> w(nbrs.size());
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
        const NodeId x = nbrs[i];
        if (x == previous)
            w[i] = 1.0 / p;
        else if (g.has_edge(previous, x))
            w[i] = 1.0;
        else
            w[i] = 1.0 / q;
    }
    return w;
}

Walk sample_walk_node2vec(const TransactionGraph& g, NodeId start, int length, double p, double q, Rng& rng) {
    if (length < 1) throw std::invalid_argument("walk length must be >= 1");
    if (!(p > 0.0 && q > 0.0)) throw std::invalid_argument("p and q must be positive");
    Walk walk{start};
    walk.reserve(static_cast<std::size_t>(length));
    std::vector<double> cumulative;
    while (static_cast<int>(walk.size()) < length) {
        const NodeId cur = walk.back();
        const auto nbrs = g.neighbors(cur);
        if (nbrs.empty()) break;
        if (walk.size() == 1) {
            walk.push_back(nbrs[rng.index(nbrs.size())]);
            continue;
        }
        const NodeId prev = walk[walk.size() - 2];
        cumulative.resize(nbrs.size());
        double total = 0.0;
        for (std::size_t i = 0; i < nbrs.size(); ++i) {
            const NodeId x = nbrs[i];
            total += x == prev ? 1.0 / p : g.has_edge(prev, x) ? 1.0 : 1.0 / q;
            cumulative[i] = total;
        }
        const double r = rng.uniform() * total;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
        walk.push_back(nbrs[std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), nbrs.size() - 1)]);
    }
    return walk;
}

std::vector<Walk> generate_walks(const TransactionGraph& g, WalkMethod method, const WalkConfig& cfg) {
    if (!g.undirected()) throw std::invalid_argument("generate_walks expects the undirected view");
    const std::size_t n = g.num_nodes();
    const std::size_t per_node = static_cast<std::size_t>(std::max(0, cfg.walks_per_node));
    std::vector<Walk> walks(n * per_node);
    const std::uint64_t stream = hash_name(to_string(method));
    parallel_chunks(walks.size(), cfg.threads, [&](std::size_t begin, std::size_t end, std::size_t) {
        for (std::size_t k = begin; k < end; ++k) {
            const std::size_t r = k / n;
            const NodeId v = static_cast<NodeId>(k % n);
            Rng rng(derive_seed(cfg.seed, {stream, v, r}));
            walks[k] = method == WalkMethod::DeepWalk
                           ? sample_walk_deepwalk(g, v, cfg.walk_length, rng)
                           : sample_walk_node2vec(g, v, cfg.walk_length, cfg.p, cfg.q, rng);
        }
    });
    return walks;
}

namespace {

double log_sigmoid(double x) {
    return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

SkipGramResult train_skipgram(const std::vector<Walk>& walks, std::size_t num_nodes, const WalkConfig& cfg,
                              WalkMethod method) {
    if (walks.empty()) throw std::invalid_argument("empty walk corpus");
    if (cfg.latent_dim < 1) throw std::invalid_argument("latent_dim must be >= 1");
    if (cfg.window < 1) throw std::invalid_argument("window must be >= 1");
    const auto dim = static_cast<Eigen::Index>(cfg.latent_dim);
    const auto n = static_cast<Eigen::Index>(num_nodes);

    Rng rng(derive_seed(cfg.seed, {hash_name("skipgram"), hash_name(to_string(method))}));
    RowMatrix input(n, dim);
    for (Eigen::Index i = 0; i < input.size(); ++i)
        input.data()[i] = (rng.uniform() - 0.5) / static_cast<double>(dim);
    RowMatrix output = RowMatrix::Zero(n, dim);

    // Noise distribution: occurrence counts ^ 0.75, sampled by inverse CDF.
    std::vector<double> counts(num_nodes, 0.0);
    std::size_t tokens = 0;
    for (const auto& w : walks) {
        for (NodeId v : w) {
            if (v >= num_nodes) throw std::out_of_range("walk references node beyond num_nodes");
            counts[v] += 1.0;
        }
        tokens += w.size();
    }
    std::vector<double> cdf(num_nodes);
    double acc = 0.0;
    for (std::size_t v = 0; v < num_nodes; ++v) {
        acc += counts[v] > 0.0 ? std::pow(counts[v], 0.75) : 0.0;
        cdf[v] = acc;
    }
    auto draw_negative = [&]() -> NodeId {
        const double r = rng.uniform() * acc;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
        return static_cast<NodeId>(std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), num_nodes - 1));
    };

    SkipGramResult result;
    result.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));
    const double total_steps = static_cast<double>(std::max(1, cfg.epochs)) * static_cast<double>(tokens);
    double processed = 0.0;
    Eigen::VectorXd grad_in(dim);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss = 0.0;
        std::size_t pairs = 0;
        for (const auto& walk : walks) {
            const auto len = static_cast<std::ptrdiff_t>(walk.size());
            for (std::ptrdiff_t i = 0; i < len; ++i) {
                const double lr = cfg.learning_rate * std::max(1e-4, 1.0 - processed / total_steps);
                processed += 1.0;
                const NodeId center = walk[static_cast<std::size_t>(i)];
                auto u = input.row(center);
                const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - cfg.window);
                const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(len - 1, i + cfg.window);
                for (std::ptrdiff_t j = lo; j <= hi; ++j) {
                    if (j == i) continue;
                    const NodeId context = walk[static_cast<std::size_t>(j)];
                    grad_in.setZero();
                    for (int k = 0; k <= cfg.negatives_per_positive; ++k) {
                        NodeId target;
                        double label;
                        if (k == 0) {
                            target = context;
                            label = 1.0;
                        } else {
                            target = draw_negative();
                            if (target == context) continue;
                            label = 0.0;
                        }
                        auto v = output.row(target);
                        const double score = u.dot(v);
                        loss -= label > 0.0 ? log_sigmoid(score) : log_sigmoid(-score);
                        const double g = (label - sigmoid(score)) * lr;
                        grad_in.noalias() += g * v.transpose();
                        v.noalias() += g * u;
                    }
                    u.noalias() += grad_in.transpose();
                    ++pairs;
                }
            }
        }
        const double mean = pairs ? loss / static_cast<double>(pairs) : 0.0;
        if (!std::isfinite(mean)) {
            std::ostringstream msg;
            msg << "skip-gram loss became non-finite at epoch " << epoch + 1 << " (lr " << cfg.learning_rate
                << ", dim " << cfg.latent_dim << ")";
            throw std::runtime_error(msg.str());
        }
        result.epoch_loss.push_back(mean);
    }
    result.embedding.values = std::move(input);
    result.embedding.method = method;
    return result;
}

SkipGramResult embed_graph(const TransactionGraph& graph, WalkMethod method, const WalkConfig& cfg) {
    const TransactionGraph und = graph.undirected() ? graph : undirected_view(graph);
    return train_skipgram(generate_walks(und, method, cfg), und.num_nodes(), cfg, method);
}

void write_embedding_csv(const std::filesystem::path& path, const TransactionGraph& graph,
                         const EmbeddingMatrix& e) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "node_id";
    for (Eigen::Index c = 0; c < e.values.cols(); ++c) out << ",e" << c;
    out << '\n' << std::setprecision(17);
    for (Eigen::Index v = 0; v < e.values.rows(); ++v) {
        out << graph.external_id(static_cast<NodeId>(v));
        for (Eigen::Index c = 0; c < e.values.cols(); ++c) out << ',' << e.values(v, c);
        out << '\n';
    }
}

EmbeddingMatrix read_embedding_csv(const std::filesystem::path& path, const TransactionGraph& graph) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.filename().string() + ": empty file");
    const auto dim = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
    EmbeddingMatrix e;
    e.values = RowMatrix::Zero(static_cast<Eigen::Index>(graph.num_nodes()), dim);
    std::size_t row = 1;
    std::size_t filled = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        const auto idx = graph.dense_index(std::stoll(cell));
        if (!idx) throw DataError(path.filename().string() + ": unknown node id " + cell, row);
        for (Eigen::Index c = 0; c < dim; ++c) {
            if (!std::getline(ss, cell, ',')) throw DataError(path.filename().string() + ": short row", row);
            e.values(*idx, c) = std::stod(cell);
        }
        ++filled;
    }
    if (filled != graph.num_nodes()) throw DataError(path.filename().string() + ": row count mismatch");
    return e;
}

void write_walks(const std::filesystem::path& path, const TransactionGraph& graph, const std::vector<Walk>& walks) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& w : walks) {
        for (std::size_t i = 0; i < w.size(); ++i) out << (i ? " " : "") << graph.external_id(w[i]);
        out << '\n';
    }
}

}  // namespace amlbench
