#include "amlbench/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace amlbench {

const char* to_string(Label label) {
    switch (label) {
        case Label::Illicit: return "illicit";
        case Label::Licit: return "licit";
        case Label::Unknown: return "unknown";
    }
    return "?";
}

namespace {

void build_csr(std::size_t n, std::span<const std::pair<NodeId, NodeId>> edges, bool reverse,
               std::vector<std::size_t>& offsets, std::vector<NodeId>& targets) {
    offsets.assign(n + 1, 0);
    for (const auto& [u, v] : edges) ++offsets[(reverse ? v : u) + 1];
    for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
    targets.resize(edges.size());
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (const auto& [u, v] : edges) {
        const NodeId from = reverse ? v : u;
        targets[cursor[from]++] = reverse ? u : v;
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

// Splits `text` into lines and each line into comma-separated fields,
// invoking fn(row_number, fields) for non-empty lines.
template <typename Fn>
void for_each_csv_row(const std::string& text, Fn&& fn) {
    std::vector<std::string_view> fields;
    std::size_t row = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string_view line(text.data() + pos, end - pos);
        pos = end + 1;
        ++row;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        fields.clear();
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            if (comma == std::string_view::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        fn(row, fields);
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '"')) s.remove_suffix(1);
    return s;
}

bool parse_int(std::string_view s, std::int64_t& out) {
    s = trim(s);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

TransactionGraph TransactionGraph::from_edges(std::size_t num_nodes,
                                              std::span<const std::pair<NodeId, NodeId>> edges,
                                              std::vector<int> time_steps,
                                              std::vector<std::int64_t> external_ids) {
    for (const auto& [u, v] : edges) {
        if (u >= num_nodes || v >= num_nodes)
            throw std::out_of_range("edge endpoint out of range");
    }
    if (!time_steps.empty() && time_steps.size() != num_nodes)
        throw std::invalid_argument("time step vector size mismatch");
    if (!external_ids.empty() && external_ids.size() != num_nodes)
        throw std::invalid_argument("external id vector size mismatch");

    TransactionGraph g;
    g.num_nodes_ = num_nodes;
    g.num_edges_ = edges.size();
    build_csr(num_nodes, edges, false, g.out_offsets_, g.out_targets_);
    build_csr(num_nodes, edges, true, g.in_offsets_, g.in_targets_);
    g.time_steps_ = std::move(time_steps);
    g.external_ids_ = std::move(external_ids);
    g.index_of_.reserve(g.external_ids_.size());
    for (std::size_t i = 0; i < g.external_ids_.size(); ++i)
        g.index_of_.emplace(g.external_ids_[i], static_cast<NodeId>(i));
    return g;
}

std::vector<std::pair<NodeId, NodeId>> TransactionGraph::edge_list() const {
    std::vector<std::pair<NodeId, NodeId>> edges;
    edges.reserve(out_targets_.size());
    for (NodeId u = 0; u < num_nodes_; ++u)
        for (NodeId v : out_neighbors(u)) edges.emplace_back(u, v);
    return edges;
}

std::optional<NodeId> TransactionGraph::dense_index(std::int64_t external_id) const {
    if (external_ids_.empty()) {
        if (external_id >= 0 && static_cast<std::size_t>(external_id) < num_nodes_)
            return static_cast<NodeId>(external_id);
        return std::nullopt;
    }
    auto it = index_of_.find(external_id);
    if (it == index_of_.end()) return std::nullopt;
    return it->second;
}

bool TransactionGraph::has_edge(NodeId u, NodeId v) const {
    const auto nbrs = out_neighbors(u);
    if (undirected_) return std::binary_search(nbrs.begin(), nbrs.end(), v);
    return std::find(nbrs.begin(), nbrs.end(), v) != nbrs.end();
}

void TransactionGraph::validate() const {
    auto check = [&](const std::vector<std::size_t>& offsets, const std::vector<NodeId>& targets) {
        if (offsets.size() != num_nodes_ + 1) throw std::logic_error("offset array size");
        if (offsets.front() != 0) throw std::logic_error("first offset must be 0");
        for (std::size_t i = 0; i < num_nodes_; ++i)
            if (offsets[i] > offsets[i + 1]) throw std::logic_error("offsets not monotone");
        if (offsets.back() != targets.size()) throw std::logic_error("last offset != target count");
        for (NodeId t : targets)
            if (t >= num_nodes_) throw std::logic_error("edge endpoint out of range");
    };
    check(out_offsets_, out_targets_);
    check(in_offsets_, in_targets_);
    const std::size_t stored = undirected_ ? 2 * num_edges_ : num_edges_;
    if (out_targets_.size() != stored) throw std::logic_error("edge count mismatch");
}

TransactionGraph undirected_view(const TransactionGraph& graph) {
    const std::size_t n = graph.num_nodes();
    std::vector<std::pair<NodeId, NodeId>> pairs;
    pairs.reserve(2 * graph.num_edges());
    for (const auto& [u, v] : graph.edge_list()) {
        if (u == v) continue;
        pairs.emplace_back(u, v);
        pairs.emplace_back(v, u);
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

    TransactionGraph g;
    g.num_nodes_ = n;
    g.num_edges_ = pairs.size() / 2;
    g.undirected_ = true;
    build_csr(n, pairs, false, g.out_offsets_, g.out_targets_);
    g.in_offsets_ = g.out_offsets_;
    g.in_targets_ = g.out_targets_;
    g.time_steps_ = graph.time_steps_;
    g.external_ids_ = graph.external_ids_;
    g.index_of_ = graph.index_of_;
    return g;
}

RowMatrix NodeTable::all_features() const {
    RowMatrix out(local_features.rows(), local_features.cols() + aggregated_features.cols());
    out << local_features, aggregated_features;
    return out;
}

LabelCounts count_labels(std::span<const Label> labels) {
    LabelCounts c;
    for (Label l : labels) {
        switch (l) {
            case Label::Illicit: ++c.illicit; break;
            case Label::Licit: ++c.licit; break;
            case Label::Unknown: ++c.unknown; break;
        }
    }
    return c;
}

EllipticPaths EllipticPaths::in_directory(const std::filesystem::path& dir) {
    return {dir / "elliptic_txs_features.csv", dir / "elliptic_txs_classes.csv",
            dir / "elliptic_txs_edgelist.csv"};
}

Dataset load_elliptic(const EllipticPaths& paths) {
    Dataset ds;
    std::vector<std::int64_t> ids;
    std::vector<int> steps;
    std::vector<double> values;
    std::unordered_map<std::int64_t, NodeId> index;

    {
        const std::string text = read_file(paths.features);
        for_each_csv_row(text, [&](std::size_t row, const std::vector<std::string_view>& f) {
            if (f.size() != static_cast<std::size_t>(kFeatureFileColumns))
                throw DataError(paths.features.filename().string() + ": expected " +
                                    std::to_string(kFeatureFileColumns) + " columns, got " +
                                    std::to_string(f.size()),
                                row);
            std::int64_t id;
            if (!parse_int(f[0], id))
                throw DataError(paths.features.filename().string() + ": bad node id", row);
            if (!index.emplace(id, static_cast<NodeId>(ids.size())).second)
                throw DataError(paths.features.filename().string() + ": duplicate node id " +
                                    std::to_string(id),
                                row);
            ids.push_back(id);
            for (std::size_t c = 1; c < f.size(); ++c) {
                double x;
                if (!parse_double(f[c], x) || !std::isfinite(x))
                    throw DataError(paths.features.filename().string() + ": bad value in column " +
                                        std::to_string(c + 1),
                                    row);
                values.push_back(x);
            }
            const double step = values[values.size() - (f.size() - 1)];
            if (step != std::floor(step))
                throw DataError(paths.features.filename().string() + ": non-integer time step", row);
            steps.push_back(static_cast<int>(step));
        });
    }

    const std::size_t n = ids.size();
    const std::size_t width = kLocalFeatureCount + kAggregatedFeatureCount;
    Eigen::Map<const RowMatrix> all(values.data(), static_cast<Eigen::Index>(n),
                                    static_cast<Eigen::Index>(width));
    ds.table.local_features = all.leftCols(kLocalFeatureCount);
    ds.table.aggregated_features = all.rightCols(kAggregatedFeatureCount);
    values.clear();
    values.shrink_to_fit();

    ds.table.labels.assign(n, Label::Unknown);
    std::vector<std::uint8_t> seen(n, 0);
    {
        const std::string text = read_file(paths.classes);
        const std::string name = paths.classes.filename().string();
        for_each_csv_row(text, [&](std::size_t row, const std::vector<std::string_view>& f) {
            if (f.size() != 2) throw DataError(name + ": expected 2 columns", row);
            std::int64_t id;
            if (!parse_int(f[0], id)) {
                if (row == 1) return;  // header
                throw DataError(name + ": bad node id", row);
            }
            auto it = index.find(id);
            if (it == index.end())
                throw DataError(name + ": unknown node id " + std::to_string(id), row);
            if (seen[it->second]++) throw DataError(name + ": duplicate node id " + std::to_string(id), row);
            const std::string_view cls = trim(f[1]);
            if (cls == "1")
                ds.table.labels[it->second] = Label::Illicit;
            else if (cls == "2")
                ds.table.labels[it->second] = Label::Licit;
            else if (cls == "unknown" || cls == "3")
                ds.table.labels[it->second] = Label::Unknown;
            else
                throw DataError(name + ": unrecognised class '" + std::string(cls) + "'", row);
        });
    }

    std::vector<std::pair<NodeId, NodeId>> edges;
    {
        const std::string text = read_file(paths.edgelist);
        const std::string name = paths.edgelist.filename().string();
        for_each_csv_row(text, [&](std::size_t row, const std::vector<std::string_view>& f) {
            if (f.size() != 2) throw DataError(name + ": expected 2 columns", row);
            std::int64_t a, b;
            if (!parse_int(f[0], a) || !parse_int(f[1], b)) {
                if (row == 1) return;  // header
                throw DataError(name + ": bad node id", row);
            }
            auto ia = index.find(a);
            auto ib = index.find(b);
            if (ia == index.end())
                throw DataError(name + ": unknown node id " + std::to_string(a), row);
            if (ib == index.end())
                throw DataError(name + ": unknown node id " + std::to_string(b), row);
            edges.emplace_back(ia->second, ib->second);
        });
    }

    ds.graph = TransactionGraph::from_edges(n, edges, std::move(steps), std::move(ids));
    return ds;
}

void write_elliptic(const Dataset& ds, const EllipticPaths& paths) {
    const auto& g = ds.graph;
    {
        std::ofstream out(paths.features);
        if (!out) throw DataError("cannot write " + paths.features.string());
        out << std::setprecision(17);
        for (NodeId v = 0; v < g.num_nodes(); ++v) {
            out << g.external_id(v);
            for (Eigen::Index c = 0; c < ds.table.local_features.cols(); ++c)
                out << ',' << ds.table.local_features(v, c);
            for (Eigen::Index c = 0; c < ds.table.aggregated_features.cols(); ++c)
                out << ',' << ds.table.aggregated_features(v, c);
            out << '\n';
        }
    }
    {
        std::ofstream out(paths.classes);
        if (!out) throw DataError("cannot write " + paths.classes.string());
        out << "txId,class\n";
        for (NodeId v = 0; v < g.num_nodes(); ++v) {
            const Label l = ds.table.labels[v];
            out << g.external_id(v) << ','
                << (l == Label::Illicit ? "1" : l == Label::Licit ? "2" : "unknown") << '\n';
        }
    }
    {
        std::ofstream out(paths.edgelist);
        if (!out) throw DataError("cannot write " + paths.edgelist.string());
        out << "txId1,txId2\n";
        for (const auto& [u, v] : g.edge_list()) out << g.external_id(u) << ',' << g.external_id(v) << '\n';
    }
}

std::vector<std::string> canonical_mismatches(const Dataset& ds) {
    std::vector<std::string> out;
    auto expect = [&](const char* what, std::size_t got, std::size_t want) {
        if (got != want)
            out.push_back(std::string(what) + ": got " + std::to_string(got) + ", expected " +
                          std::to_string(want));
    };
    const LabelCounts c = count_labels(ds.table.labels);
    expect("nodes", ds.graph.num_nodes(), kCanonicalNodes);
    expect("edges", ds.graph.num_edges(), kCanonicalEdges);
    expect("illicit", c.illicit, kCanonicalIllicit);
    expect("licit", c.licit, kCanonicalLicit);
    std::set<int> steps(ds.graph.time_steps().begin(), ds.graph.time_steps().end());
    expect("time steps", steps.size(), kNumTimeSteps);
    return out;
}

Split split_of_time_step(int t) {
    if (t < 1 || t > kNumTimeSteps)
        throw DataError("time step " + std::to_string(t) + " outside 1.." + std::to_string(kNumTimeSteps));
    if (t <= 30) return Split::Train;
    if (t <= 40) return Split::Validation;
    return Split::Test;
}

const std::vector<std::uint8_t>& SplitMasks::mask(Split split) const {
    switch (split) {
        case Split::Train: return train;
        case Split::Validation: return validation;
        case Split::Test: return test;
    }
    return test;
}

std::vector<NodeId> SplitMasks::labelled(Split split) const {
    const auto& m = mask(split);
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < m.size(); ++i)
        if (m[i] && supervised[i]) out.push_back(static_cast<NodeId>(i));
    return out;
}

SplitMasks make_splits(const TransactionGraph& graph, const NodeTable& table) {
    const std::size_t n = graph.num_nodes();
    if (graph.time_steps().size() != n) throw DataError("graph has no time steps");
    if (table.labels.size() != n) throw DataError("label count does not match node count");
    SplitMasks m;
    m.train.assign(n, 0);
    m.validation.assign(n, 0);
    m.test.assign(n, 0);
    m.supervised.assign(n, 0);
    for (NodeId v = 0; v < n; ++v) {
        const Split s = split_of_time_step(graph.time_step(v));
        const bool labelled = table.labels[v] != Label::Unknown;
        m.supervised[v] = labelled;
        SplitCounts* counts = nullptr;
        switch (s) {
            case Split::Train: m.train[v] = 1; counts = &m.train_counts; break;
            case Split::Validation: m.validation[v] = 1; counts = &m.validation_counts; break;
            case Split::Test: m.test[v] = 1; counts = &m.test_counts; break;
        }
        ++counts->nodes;
        counts->labelled += labelled;
        counts->illicit += table.labels[v] == Label::Illicit;
    }
    return m;
}

DatasetManifest make_manifest(const Dataset& ds) {
    DatasetManifest m;
    m.num_nodes = ds.graph.num_nodes();
    m.num_edges = ds.graph.num_edges();
    m.undirected_edges = undirected_view(ds.graph).num_edges();
    std::set<int> steps(ds.graph.time_steps().begin(), ds.graph.time_steps().end());
    m.num_time_steps = static_cast<int>(steps.size());
    m.labels = count_labels(ds.table.labels);
    const SplitMasks masks = make_splits(ds.graph, ds.table);
    m.train = masks.train_counts;
    m.validation = masks.validation_counts;
    m.test = masks.test_counts;
    return m;
}

std::string DatasetManifest::to_text() const {
    std::ostringstream out;
    out << "num_nodes=" << num_nodes << '\n'
        << "num_edges=" << num_edges << '\n'
        << "undirected_edges=" << undirected_edges << '\n'
        << "num_time_steps=" << num_time_steps << '\n'
        << "label_illicit=" << labels.illicit << '\n'
        << "label_licit=" << labels.licit << '\n'
        << "label_unknown=" << labels.unknown << '\n';
    auto split = [&](const char* name, const SplitCounts& c) {
        out << name << "_nodes=" << c.nodes << '\n'
            << name << "_labelled=" << c.labelled << '\n'
            << name << "_illicit=" << c.illicit << '\n';
    };
    split("train", train);
    split("validation", validation);
    split("test", test);
    return out.str();
}

}  // namespace amlbench
