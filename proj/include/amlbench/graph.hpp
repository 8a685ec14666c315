#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace amlbench {

using NodeId = std::uint32_t;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised for malformed or inconsistent input data. Carries the offending
/// file row (1-based) when one applies.
class DataError : public std::runtime_error {
public:
    DataError(const std::string& what, std::size_t row = 0)
        : std::runtime_error(row ? what + " (row " + std::to_string(row) + ")" : what), row_(row) {}
    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

enum class Label : std::uint8_t { Illicit, Licit, Unknown };

const char* to_string(Label label);

inline constexpr int kNumTimeSteps = 49;
inline constexpr int kLocalFeatureCount = 94;
inline constexpr int kAggregatedFeatureCount = 72;
inline constexpr int kFeatureFileColumns = 1 + kLocalFeatureCount + kAggregatedFeatureCount;

/// Immutable graph in compressed adjacency form. A directed graph keeps
/// separate out/in arrays; the undirected view stores each unordered pair in
/// both endpoint lists and reports the pair count as num_edges().
class TransactionGraph {
public:
    TransactionGraph() = default;

    /// Builds from dense-index edges. Edge order within each adjacency list
    /// follows input order, so the directed view is a faithful copy of the file.
    static TransactionGraph from_edges(std::size_t num_nodes,
                                       std::span<const std::pair<NodeId, NodeId>> edges,
                                       std::vector<int> time_steps = {},
                                       std::vector<std::int64_t> external_ids = {});

    std::size_t num_nodes() const { return num_nodes_; }
    std::size_t num_edges() const { return num_edges_; }
    bool undirected() const { return undirected_; }

    std::span<const NodeId> out_neighbors(NodeId v) const {
        return {out_targets_.data() + out_offsets_[v], out_targets_.data() + out_offsets_[v + 1]};
    }
    std::span<const NodeId> in_neighbors(NodeId v) const {
        return {in_targets_.data() + in_offsets_[v], in_targets_.data() + in_offsets_[v + 1]};
    }
    /// Alias of out_neighbors; reads naturally on the undirected view.
    std::span<const NodeId> neighbors(NodeId v) const { return out_neighbors(v); }
    std::size_t out_degree(NodeId v) const { return out_offsets_[v + 1] - out_offsets_[v]; }
    std::size_t in_degree(NodeId v) const { return in_offsets_[v + 1] - in_offsets_[v]; }
    std::size_t degree(NodeId v) const { return out_degree(v); }

    const std::vector<std::size_t>& out_offsets() const { return out_offsets_; }
    const std::vector<NodeId>& out_targets() const { return out_targets_; }
    const std::vector<std::size_t>& in_offsets() const { return in_offsets_; }
    const std::vector<NodeId>& in_targets() const { return in_targets_; }

    /// Directed edges as (source, target) in CSR order.
    std::vector<std::pair<NodeId, NodeId>> edge_list() const;

    int time_step(NodeId v) const { return time_steps_.empty() ? 0 : time_steps_[v]; }
    const std::vector<int>& time_steps() const { return time_steps_; }

    std::int64_t external_id(NodeId v) const {
        return external_ids_.empty() ? static_cast<std::int64_t>(v) : external_ids_[v];
    }
    const std::vector<std::int64_t>& external_ids() const { return external_ids_; }
    std::optional<NodeId> dense_index(std::int64_t external_id) const;

    bool has_edge(NodeId u, NodeId v) const;

    /// Checks the CSR invariants; throws std::logic_error on violation.
    void validate() const;

    friend TransactionGraph undirected_view(const TransactionGraph& graph);

private:
    std::size_t num_nodes_ = 0;
    std::size_t num_edges_ = 0;
    bool undirected_ = false;
    std::vector<std::size_t> out_offsets_{0};
    std::vector<NodeId> out_targets_;
    std::vector<std::size_t> in_offsets_{0};
    std::vector<NodeId> in_targets_;
    std::vector<int> time_steps_;
    std::vector<std::int64_t> external_ids_;
    std::unordered_map<std::int64_t, NodeId> index_of_;
};

/// Symmetric simple view: both directions present, duplicate pairs and
/// self-loops dropped, neighbor lists sorted.
TransactionGraph undirected_view(const TransactionGraph& graph);

struct NodeTable {
    RowMatrix local_features;       // num_nodes x 94, time step is column 0
    RowMatrix aggregated_features;  // num_nodes x 72
    std::vector<Label> labels;

    std::size_t num_nodes() const { return labels.size(); }
    /// [local | aggregated], 166 columns.
    RowMatrix all_features() const;
};

struct LabelCounts {
    std::size_t illicit = 0;
    std::size_t licit = 0;
    std::size_t unknown = 0;
};

LabelCounts count_labels(std::span<const Label> labels);

struct Dataset {
    TransactionGraph graph;
    NodeTable table;
};

struct EllipticPaths {
    std::filesystem::path features;
    std::filesystem::path classes;
    std::filesystem::path edgelist;

    /// Public distribution file names inside `dir`.
    static EllipticPaths in_directory(const std::filesystem::path& dir);
};

/// Parses the features/classes/edge-list CSV triplet. Dense indices follow
/// the features file order. Throws DataError with a row number on malformed
/// rows, duplicate ids or dangling edge endpoints.
Dataset load_elliptic(const EllipticPaths& paths);

/// Writes the triplet back in the same layout (classes file with header).
void write_elliptic(const Dataset& dataset, const EllipticPaths& paths);

inline constexpr std::size_t kCanonicalNodes = 203769;
inline constexpr std::size_t kCanonicalEdges = 234355;
inline constexpr std::size_t kCanonicalIllicit = 4545;
inline constexpr std::size_t kCanonicalLicit = 42019;

/// Mismatches between a loaded dataset and the published Elliptic counts;
/// empty when everything agrees.
std::vector<std::string> canonical_mismatches(const Dataset& dataset);

enum class Split : std::uint8_t { Train, Validation, Test };

struct SplitCounts {
    std::size_t nodes = 0;
    std::size_t labelled = 0;
    std::size_t illicit = 0;
};

struct SplitMasks {
    std::vector<std::uint8_t> train;
    std::vector<std::uint8_t> validation;
    std::vector<std::uint8_t> test;
    /// Set for Illicit/Licit nodes; Unknown nodes never enter loss or metrics.
    std::vector<std::uint8_t> supervised;
    SplitCounts train_counts, validation_counts, test_counts;

    const std::vector<std::uint8_t>& mask(Split split) const;
    /// Labelled node indices of a split in ascending order.
    std::vector<NodeId> labelled(Split split) const;
};

/// Temporal split: train 1-30, validation 31-40, test 41-49.
SplitMasks make_splits(const TransactionGraph& graph, const NodeTable& table);

Split split_of_time_step(int time_step);

/// Key-value summary written by the ingest command.
struct DatasetManifest {
    std::size_t num_nodes = 0;
    std::size_t num_edges = 0;
    std::size_t undirected_edges = 0;
    int num_time_steps = 0;
    LabelCounts labels;
    SplitCounts train, validation, test;

    std::string to_text() const;
};

DatasetManifest make_manifest(const Dataset& dataset);

}  // namespace amlbench
