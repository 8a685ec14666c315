#pragma once

#include "amlbench/evaluation.hpp"
#include "amlbench/gnn.hpp"
#include "amlbench/graph.hpp"
#include "amlbench/hypertune.hpp"
#include "amlbench/manual_features.hpp"
#include "amlbench/nn.hpp"
#include "amlbench/walk_embed.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace amlbench {

inline constexpr const char* kToolVersion = "1.0.0";

enum class Method { Intrinsic, Manual, DeepWalk, DeepWalkNi, Node2Vec, Node2VecNi, Gcn, GraphSage, Gat, Gin };

const char* to_string(Method method);
std::optional<Method> parse_method(const std::string& name);
/// All ten benchmark methods in report order.
const std::vector<Method>& all_methods();

bool is_gnn(Method m);
bool is_walk(Method m);
/// Whether the decoder input starts with the intrinsic columns.
bool uses_intrinsic(Method m);

/// A model that could not be trained (non-finite loss, degenerate split, ...).
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A malformed or inconsistent run configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class FeatureSet { All166, Local94 };

struct RunConfig {
    Method method = Method::Intrinsic;
    std::filesystem::path dataset_dir;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::string thresholds = "0.1,1,10,p";
    /// Bootstrap resamples (tabular) or mask halvings (GNN).
    std::size_t resamples = 100;
    /// Intrinsic columns for tabular methods; GNNs always use the local 94.
    FeatureSet feature_set = FeatureSet::All166;
    /// Hyperparameters keyed by snake-case table row name.
    TrialConfig hyper;
    bool class_weighting = false;
    bool directed_message_passing = false;
    /// 0 selects exact betweenness.
    std::size_t betweenness_pivots = 2000;
    /// Power-iteration limits for eigenvector centrality. Graphs made of many
    /// components with close leading eigenvalues can need far more than the
    /// default iteration count.
    double eigenvector_tol = ManualFeatureConfig{}.eigenvector_tol;
    int eigenvector_max_iter = ManualFeatureConfig{}.eigenvector_max_iter;

    /// The tuned values for `method`.
    static RunConfig defaults(Method method);

    /// Sets one key; throws ConfigError on unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    /// Flat `key=value` lines; `#` starts a comment. The method line, when
    /// present, resets the other keys to that method's defaults first.
    static RunConfig parse(const std::string& text, std::optional<Method> method = std::nullopt);
    static RunConfig load(const std::filesystem::path& path, std::optional<Method> method = std::nullopt);
    std::string to_text() const;

    /// This config with the method-independent settings of `other`.
    RunConfig with_common(const RunConfig& other) const;

    void apply(const TrialConfig& trial);
    /// Throws ConfigError when a hyperparameter is out of its range.
    void validate() const;

    double real(const std::string& key) const;
    std::int64_t integer(const std::string& key) const;
};

ManualFeatureConfig manual_config(const RunConfig& config);
WalkConfig walk_config(const RunConfig& config);
gnn::GnnConfig gnn_config(const RunConfig& config);
nn::MlpConfig decoder_config(const RunConfig& config, nn::Index input_dim);
int decoder_epochs(const RunConfig& config);

/// Dataset plus everything derived from it that every method shares.
struct PreparedData {
    const Dataset* dataset = nullptr;
    TransactionGraph undirected;
    SplitMasks splits;
    std::vector<int> labels;  // 1 illicit, 0 licit or unknown
    std::vector<NodeId> train_rows, validation_rows, test_rows;
    double train_prevalence_percent = 0.0;
    std::string manifest_text;
    std::string manifest_hash;
};

PreparedData prepare(const Dataset& dataset);

/// Loads the triplet in `dir` (DataError on malformed input).
Dataset load_dataset(const std::filesystem::path& dir);

std::string hex_hash(const std::string& text);

struct FeatureMatrix {
    RowMatrix values;
    std::vector<std::string> columns;

    std::string column_hash() const;
};

/// Graph-derived columns a method needs, computed once and reusable.
struct FeatureArtifacts {
    std::optional<ManualFeatureSet> manual;
    std::optional<EmbeddingMatrix> embedding;
    std::vector<double> skipgram_loss;
};

FeatureArtifacts build_artifacts(const RunConfig& config, const PreparedData& data);

/// Decoder or GNN input: [intrinsic | manual | embedding] as the method
/// selects. Manual and embedding columns are standardised to zero mean and
/// unit variance over all nodes. Throws ConfigError for an empty selection.
FeatureMatrix assemble_features(const RunConfig& config, const PreparedData& data, const FeatureArtifacts& artifacts);

struct MethodResult {
    RunConfig config;
    std::vector<std::string> columns;
    std::string column_hash;
    std::vector<double> scores;  // illicit probability per node
    double validation_auc_pr = 0.0;
    std::vector<ScoredNode> test_scored;
    EvalReport report;
    std::vector<nn::TrainLogRow> log;
    std::vector<double> skipgram_loss;
    nn::NamedParams params;
};

struct TrainEvalOptions {
    /// Skip the test-set report (used while tuning).
    bool evaluate_test = true;
    /// Reuse expensive graph artifacts when the caller has them.
    const FeatureArtifacts* artifacts = nullptr;
};

/// Trains the configured method on the train split and evaluates it on the
/// test split with the method's variance protocol: bootstrap for tabular
/// methods, mask halving for GNNs. Training failures surface as
/// TrainingError with the method name.
MethodResult train_eval(const RunConfig& config, const PreparedData& data, const TrainEvalOptions& options = {});

/// Validation AUC-PR objective for the tuner. Graph artifacts that do not
/// depend on the trial are cached across calls.
Objective make_objective(const RunConfig& base, const PreparedData& data);

/// Writes runs/<stamp>-<method>/{config, manifest, metrics.csv, log.csv,
/// checkpoint, curves.csv} under `out_root` and returns the directory.
std::filesystem::path write_run_directory(const std::filesystem::path& out_root, const std::string& stamp,
                                          const MethodResult& result, const PreparedData& data);

/// Local time as YYYYmmdd-HHMMSS.
std::string timestamp_now();

struct BenchmarkRow {
    Method method = Method::Intrinsic;
    bool ok = false;
    std::string error;
    MethodResult result;
};

/// Runs each config in turn; a failing method yields a row with ok=false and
/// the remaining methods still run.
std::vector<BenchmarkRow> benchmark_all(const std::vector<RunConfig>& configs, const PreparedData& data,
                                        const std::function<void(const BenchmarkRow&)>& on_row = {});

/// Table with one line per method; failed rows print "failed".
std::string format_benchmark_table(const std::vector<BenchmarkRow>& rows, const std::vector<std::string>& metrics);

}  // namespace amlbench
