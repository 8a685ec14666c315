#include "amlbench/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>

namespace amlbench {

namespace {

struct MethodInfo {
    Method method;
    const char* name;
};

constexpr MethodInfo kMethods[] = {
    {Method::Intrinsic, "intrinsic"}, {Method::Manual, "manual"},       {Method::DeepWalk, "deepwalk"},
    {Method::DeepWalkNi, "deepwalk-ni"}, {Method::Node2Vec, "node2vec"}, {Method::Node2VecNi, "node2vec-ni"},
    {Method::Gcn, "gcn"},             {Method::GraphSage, "graphsage"}, {Method::Gat, "gat"},
    {Method::Gin, "gin"},
};

gnn::Architecture architecture_of(Method m) {
    switch (m) {
        case Method::Gcn: return gnn::Architecture::Gcn;
        case Method::GraphSage: return gnn::Architecture::Sage;
        case Method::Gat: return gnn::Architecture::Gat;
        case Method::Gin: return gnn::Architecture::Gin;
        default: throw std::logic_error("not a GNN method");
    }
}

bool is_node2vec(Method m) { return m == Method::Node2Vec || m == Method::Node2VecNi; }

// Walk decoders are not tuned, so they keep the fixed two-layer, width-ten
// architecture; the keys still exist so a config file can override them.
constexpr std::int64_t kWalkDecoderLayers = 2;
constexpr std::int64_t kWalkDecoderHidden = 10;

ParamSpec spec_for(Method m, const std::string& key) {
    const HyperSpace space = HyperSpace::for_method(to_string(m));
    if (const ParamSpec* p = space.find(key)) return *p;
    if (key == "number_of_layers_decoder") return ParamSpec::integer(key, 1, 3);
    if (key == "hidden_dimension_decoder") return ParamSpec::integer(key, 5, 20);
    throw ConfigError("key '" + key + "' does not apply to method " + to_string(m));
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("expected true/false for " + key + ", got '" + v + "'");
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        if (!v.empty() && v[0] != '-') {
            const unsigned long long x = std::stoull(v, &used);
            if (used == v.size()) return x;
        }
    } catch (const std::logic_error&) {
    }
    throw ConfigError("expected a non-negative integer for " + key + ", got '" + v + "'");
}

double parse_positive_real(const std::string& key, const std::string& v) {
    double x = 0.0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec == std::errc() && end == v.data() + v.size() && x > 0.0 && std::isfinite(x)) return x;
    throw ConfigError("expected a positive number for " + key + ", got '" + v + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

void standardize_columns(RowMatrix& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double mean = m.col(c).mean();
        m.col(c).array() -= mean;
        const double var = m.rows() > 1 ? m.col(c).squaredNorm() / static_cast<double>(m.rows()) : 0.0;
        if (var > 0.0) m.col(c) /= std::sqrt(var);
    }
}

}  // namespace

const char* to_string(Method method) {
    for (const auto& i : kMethods)
        if (i.method == method) return i.name;
    return "?";
}

std::optional<Method> parse_method(const std::string& name) {
    for (const auto& i : kMethods)
        if (name == i.name) return i.method;
    if (name == "egonet") return Method::Manual;
    if (name == "sage") return Method::GraphSage;
    return std::nullopt;
}

const std::vector<Method>& all_methods() {
    static const std::vector<Method> all = [] {
        std::vector<Method> v;
        for (const auto& i : kMethods) v.push_back(i.method);
        return v;
    }();
    return all;
}

bool is_gnn(Method m) { return m == Method::Gcn || m == Method::GraphSage || m == Method::Gat || m == Method::Gin; }

bool is_walk(Method m) {
    return m == Method::DeepWalk || m == Method::DeepWalkNi || m == Method::Node2Vec || m == Method::Node2VecNi;
}

bool uses_intrinsic(Method m) { return m != Method::DeepWalkNi && m != Method::Node2VecNi; }

RunConfig RunConfig::defaults(Method method) {
    RunConfig c;
    c.method = method;
    auto& h = c.hyper;
    switch (method) {
        case Method::Intrinsic:
            h["number_of_layers_decoder"] = std::int64_t{1};
            h["hidden_dimension_decoder"] = std::int64_t{5};
            h["learning_rate"] = 0.0163;
            h["number_of_epochs_decoder"] = std::int64_t{497};
            break;
        case Method::Manual:
            h["random_jump_parameter"] = ManualFeatureConfig{}.pagerank_alpha;
            h["number_of_layers_decoder"] = std::int64_t{1};
            h["hidden_dimension_decoder"] = std::int64_t{6};
            h["learning_rate"] = 0.0166;
            h["number_of_epochs_decoder"] = std::int64_t{64};
            break;
        case Method::DeepWalk:
        case Method::DeepWalkNi:
        case Method::Node2Vec:
        case Method::Node2VecNi: {
            const bool n2v = is_node2vec(method);
            const WalkConfig w = n2v ? tuned_node2vec_config() : tuned_deepwalk_config();
            h["number_of_walks_per_node"] = std::int64_t{w.walks_per_node};
            h["walk_length"] = std::int64_t{w.walk_length};
            h["word2vec_context_window_size"] = std::int64_t{w.window};
            h["latent_dimension"] = std::int64_t{w.latent_dim};
            if (n2v) {
                h["return_parameter"] = w.p;
                h["in_out_parameter"] = w.q;
            }
            h["number_of_negative_samples"] = std::int64_t{w.negatives_per_positive};
            h["learning_rate"] = w.learning_rate;
            h["number_of_epochs"] = std::int64_t{w.epochs};
            h["number_of_epochs_decoder"] = std::int64_t{n2v ? 93 : 80};
            h["number_of_layers_decoder"] = kWalkDecoderLayers;
            h["hidden_dimension_decoder"] = kWalkDecoderHidden;
            break;
        }
        case Method::Gcn:
        case Method::GraphSage:
        case Method::Gat:
        case Method::Gin: {
            const gnn::GnnConfig g = gnn::tuned_config(architecture_of(method));
            h["latent_dimension"] = std::int64_t{g.latent_dim};
            if (method == Method::Gcn || method == Method::GraphSage)
                h["gnn_hidden_dimensions"] = std::int64_t{g.hidden_dim};
            h["gnn_layers"] = std::int64_t{g.layers};
            if (method == Method::GraphSage) {
                h["number_of_neighbourhood_samples"] = std::int64_t{g.sample_size};
                h["aggregator"] = std::string(gnn::to_string(g.aggregator));
            }
            if (method == Method::Gat) h["number_of_heads"] = std::int64_t{g.heads};
            h["learning_rate"] = g.learning_rate;
            h["dropout_rate"] = g.dropout;
            h["number_of_epochs"] = std::int64_t{g.epochs};
            break;
        }
    }
    if (is_gnn(method)) c.feature_set = FeatureSet::Local94;
    return c;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "method") {
        const auto m = parse_method(value);
        if (!m) throw ConfigError("unknown method '" + value + "'");
        if (*m != method) *this = defaults(*m).with_common(*this);
    } else if (key == "dataset_dir") {
        dataset_dir = value;
    } else if (key == "seed") {
        seed = parse_unsigned(key, value);
    } else if (key == "threads") {
        threads = std::max<std::size_t>(1, parse_unsigned(key, value));
    } else if (key == "thresholds") {
        (void)parse_thresholds(value, 1.0);  // syntax check
        thresholds = value;
    } else if (key == "resamples") {
        resamples = parse_unsigned(key, value);
    } else if (key == "feature_set") {
        if (value == "166") feature_set = FeatureSet::All166;
        else if (value == "94") feature_set = FeatureSet::Local94;
        else throw ConfigError("feature_set must be 166 or 94, got '" + value + "'");
    } else if (key == "class_weighting") {
        class_weighting = parse_bool(key, value);
    } else if (key == "directed_message_passing") {
        directed_message_passing = parse_bool(key, value);
    } else if (key == "betweenness_pivots") {
        betweenness_pivots = parse_unsigned(key, value);
    } else if (key == "eigenvector_tol") {
        eigenvector_tol = parse_positive_real(key, value);
    } else if (key == "eigenvector_max_iter") {
        const auto n = parse_unsigned(key, value);
        if (n < 1 || n > static_cast<std::uint64_t>(std::numeric_limits<int>::max()))
            throw ConfigError("eigenvector_max_iter must be a positive int, got '" + value + "'");
        eigenvector_max_iter = static_cast<int>(n);
    } else {
        const ParamSpec spec = spec_for(method, key);
        try {
            hyper[key] = spec.parse(value);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
}

RunConfig RunConfig::with_common(const RunConfig& other) const {
    RunConfig c = *this;
    c.dataset_dir = other.dataset_dir;
    c.seed = other.seed;
    c.threads = other.threads;
    c.thresholds = other.thresholds;
    c.resamples = other.resamples;
    c.class_weighting = other.class_weighting;
    c.directed_message_passing = other.directed_message_passing;
    c.betweenness_pivots = other.betweenness_pivots;
    c.eigenvector_tol = other.eigenvector_tol;
    c.eigenvector_max_iter = other.eigenvector_max_iter;
    return c;
}

RunConfig RunConfig::parse(const std::string& text, std::optional<Method> method) {
    struct Entry {
        std::string key, value;
        std::size_t line;
    };
    std::vector<Entry> entries;
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    std::optional<Method> file_method;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key=value");
        Entry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), number};
        if (e.key == "method") {
            file_method = parse_method(e.value);
            if (!file_method) throw ConfigError("line " + std::to_string(number) + ": unknown method '" + e.value + "'");
            continue;
        }
        entries.push_back(std::move(e));
    }
    const Method m = method ? *method : file_method ? *file_method : Method::Intrinsic;
    RunConfig c = defaults(m);
    for (const auto& e : entries) {
        try {
            c.set(e.key, e.value);
        } catch (const ConfigError& err) {
            throw ConfigError("line " + std::to_string(e.line) + ": " + err.what());
        }
    }
    if (is_gnn(c.method)) c.feature_set = FeatureSet::Local94;
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path, std::optional<Method> method) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse(buf.str(), method);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string RunConfig::to_text() const {
    std::ostringstream out;
    out << "method=" << to_string(method) << '\n';
    if (!dataset_dir.empty()) out << "dataset_dir=" << dataset_dir.string() << '\n';
    out << "seed=" << seed << '\n'
        << "threads=" << threads << '\n'
        << "thresholds=" << thresholds << '\n'
        << "resamples=" << resamples << '\n'
        << "feature_set=" << (feature_set == FeatureSet::All166 ? "166" : "94") << '\n'
        << "class_weighting=" << (class_weighting ? "true" : "false") << '\n';
    if (is_gnn(method)) out << "directed_message_passing=" << (directed_message_passing ? "true" : "false") << '\n';
    if (method == Method::Manual) {
        out << "betweenness_pivots=" << betweenness_pivots << '\n'
            << "eigenvector_tol=" << format_value(eigenvector_tol) << '\n'
            << "eigenvector_max_iter=" << eigenvector_max_iter << '\n';
    }
    for (const auto& [key, value] : hyper) out << key << '=' << format_value(value) << '\n';
    return out.str();
}

void RunConfig::apply(const TrialConfig& trial) {
    for (const auto& [key, value] : trial) {
        const ParamSpec spec = spec_for(method, key);
        if (!spec.contains(value)) throw ConfigError(key + "=" + format_value(value) + " is out of range");
        hyper[key] = value;
    }
}

void RunConfig::validate() const {
    for (const auto& [key, value] : hyper) {
        const ParamSpec spec = spec_for(method, key);
        if (!spec.contains(value)) throw ConfigError(key + "=" + format_value(value) + " is out of range");
    }
    const RunConfig d = defaults(method);
    for (const auto& [key, _] : d.hyper)
        if (!hyper.contains(key)) throw ConfigError("missing hyperparameter " + key);
    if (resamples < 1) throw ConfigError("resamples must be >= 1");
}

double RunConfig::real(const std::string& key) const {
    auto it = hyper.find(key);
    if (it == hyper.end()) throw ConfigError("missing hyperparameter " + key);
    return as_double(it->second);
}

std::int64_t RunConfig::integer(const std::string& key) const {
    auto it = hyper.find(key);
    if (it == hyper.end()) throw ConfigError("missing hyperparameter " + key);
    return as_int(it->second);
}

namespace {

std::uint64_t stream(const RunConfig& c, const char* name) { return derive_seed(c.seed, {hash_name(name)}); }

}  // namespace

ManualFeatureConfig manual_config(const RunConfig& c) {
    ManualFeatureConfig m;
    m.pagerank_alpha = c.real("random_jump_parameter");
    m.betweenness_pivots = c.betweenness_pivots;
    m.eigenvector_tol = c.eigenvector_tol;
    m.eigenvector_max_iter = c.eigenvector_max_iter;
    m.seed = stream(c, "betweenness");
    m.threads = c.threads;
    return m;
}

WalkConfig walk_config(const RunConfig& c) {
    WalkConfig w;
    w.walks_per_node = static_cast<int>(c.integer("number_of_walks_per_node"));
    w.walk_length = static_cast<int>(c.integer("walk_length"));
    w.window = static_cast<int>(c.integer("word2vec_context_window_size"));
    w.latent_dim = static_cast<int>(c.integer("latent_dimension"));
    if (is_node2vec(c.method)) {
        w.p = c.real("return_parameter");
        w.q = c.real("in_out_parameter");
    }
    w.negatives_per_positive = static_cast<int>(c.integer("number_of_negative_samples"));
    w.epochs = static_cast<int>(c.integer("number_of_epochs"));
    w.learning_rate = c.real("learning_rate");
    w.seed = stream(c, "walks");
    w.threads = c.threads;
    return w;
}

gnn::GnnConfig gnn_config(const RunConfig& c) {
    gnn::GnnConfig g = gnn::tuned_config(architecture_of(c.method));
    g.latent_dim = static_cast<int>(c.integer("latent_dimension"));
    if (c.hyper.contains("gnn_hidden_dimensions")) g.hidden_dim = static_cast<int>(c.integer("gnn_hidden_dimensions"));
    g.layers = static_cast<int>(c.integer("gnn_layers"));
    g.dropout = c.real("dropout_rate");
    g.learning_rate = c.real("learning_rate");
    g.epochs = static_cast<int>(c.integer("number_of_epochs"));
    if (c.method == Method::GraphSage) {
        g.sample_size = static_cast<int>(c.integer("number_of_neighbourhood_samples"));
        const auto agg = gnn::parse_aggregator(as_string(c.hyper.at("aggregator")));
        if (!agg) throw ConfigError("unknown aggregator");
        g.aggregator = *agg;
    }
    if (c.method == Method::Gat) g.heads = static_cast<int>(c.integer("number_of_heads"));
    g.directed_mp = c.directed_message_passing;
    g.class_weighting = c.class_weighting;
    g.seed = stream(c, "gnn");
    return g;
}

nn::MlpConfig decoder_config(const RunConfig& c, nn::Index input_dim) {
    return {input_dim, static_cast<int>(c.integer("number_of_layers_decoder")),
            static_cast<int>(c.integer("hidden_dimension_decoder"))};
}

int decoder_epochs(const RunConfig& c) { return static_cast<int>(c.integer("number_of_epochs_decoder")); }

std::string hex_hash(const std::string& text) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_name(text.c_str())));
    return buf;
}

Dataset load_dataset(const std::filesystem::path& dir) {
    if (dir.empty()) throw DataError("no dataset directory given");
    if (!std::filesystem::is_directory(dir)) throw DataError("dataset directory " + dir.string() + " does not exist");
    return load_elliptic(EllipticPaths::in_directory(dir));
}

PreparedData prepare(const Dataset& dataset) {
    PreparedData d;
    d.dataset = &dataset;
    d.undirected = undirected_view(dataset.graph);
    d.splits = make_splits(dataset.graph, dataset.table);
    d.labels.resize(dataset.table.num_nodes());
    for (std::size_t v = 0; v < d.labels.size(); ++v) d.labels[v] = dataset.table.labels[v] == Label::Illicit ? 1 : 0;
    d.train_rows = d.splits.labelled(Split::Train);
    d.validation_rows = d.splits.labelled(Split::Validation);
    d.test_rows = d.splits.labelled(Split::Test);
    const auto& tc = d.splits.train_counts;
    d.train_prevalence_percent = tc.labelled ? 100.0 * static_cast<double>(tc.illicit) / static_cast<double>(tc.labelled)
                                             : 0.0;
    d.manifest_text = make_manifest(dataset).to_text();
    d.manifest_hash = hex_hash(d.manifest_text);
    return d;
}

std::string FeatureMatrix::column_hash() const {
    std::string joined;
    for (const auto& c : columns) joined += c + '\n';
    return hex_hash(joined);
}

FeatureArtifacts build_artifacts(const RunConfig& c, const PreparedData& data) {
    FeatureArtifacts a;
    if (c.method == Method::Manual) {
        a.manual = compute_manual_features(data.dataset->graph, manual_config(c));
    } else if (is_walk(c.method)) {
        const WalkMethod wm = is_node2vec(c.method) ? WalkMethod::Node2Vec : WalkMethod::DeepWalk;
        const auto walks = generate_walks(data.undirected, wm, walk_config(c));
        auto trained = train_skipgram(walks, data.undirected.num_nodes(), walk_config(c), wm);
        a.embedding = std::move(trained.embedding);
        a.skipgram_loss = std::move(trained.epoch_loss);
    }
    return a;
}

FeatureMatrix assemble_features(const RunConfig& c, const PreparedData& data, const FeatureArtifacts& a) {
    const NodeTable& table = data.dataset->table;
    const auto n = static_cast<Eigen::Index>(table.num_nodes());
    std::vector<const RowMatrix*> blocks;
    FeatureMatrix out;

    RowMatrix intrinsic, manual, embedding;
    if (is_gnn(c.method) || (uses_intrinsic(c.method) && c.feature_set == FeatureSet::Local94)) {
        intrinsic = table.local_features;
        for (int k = 0; k < kLocalFeatureCount; ++k) out.columns.push_back("local_" + std::to_string(k));
        blocks.push_back(&intrinsic);
    } else if (uses_intrinsic(c.method)) {
        intrinsic = table.all_features();
        for (int k = 0; k < kLocalFeatureCount; ++k) out.columns.push_back("local_" + std::to_string(k));
        for (int k = 0; k < kAggregatedFeatureCount; ++k) out.columns.push_back("aggregated_" + std::to_string(k));
        blocks.push_back(&intrinsic);
    }
    if (c.method == Method::Manual) {
        if (!a.manual) throw ConfigError("manual features were not computed");
        manual = a.manual->as_matrix();
        standardize_columns(manual);
        for (const auto& name : ManualFeatureSet::column_names()) out.columns.push_back("manual_" + name);
        blocks.push_back(&manual);
    }
    if (is_walk(c.method)) {
        if (!a.embedding) throw ConfigError("embedding was not computed");
        embedding = a.embedding->values;
        standardize_columns(embedding);
        for (Eigen::Index k = 0; k < embedding.cols(); ++k) out.columns.push_back("embedding_" + std::to_string(k));
        blocks.push_back(&embedding);
    }
    if (blocks.empty() || out.columns.empty()) throw ConfigError("empty feature selection");

    out.values.resize(n, static_cast<Eigen::Index>(out.columns.size()));
    Eigen::Index col = 0;
    for (const RowMatrix* b : blocks) {
        if (b->rows() != n) throw DataError("feature block has the wrong number of rows");
        out.values.middleCols(col, b->cols()) = *b;
        col += b->cols();
    }
    return out;
}

namespace {

std::vector<Label> labels_of(const PreparedData& d) { return d.dataset->table.labels; }

double validation_auc_pr(const std::vector<double>& scores, const PreparedData& d) {
    const auto labels = labels_of(d);
    const auto scored = make_scored(scores, labels, d.validation_rows);
    const bool any = std::any_of(scored.begin(), scored.end(), [](const auto& s) { return s.illicit; });
    return any ? auc_pr(scored) : 0.0;
}

void train_tabular(const RunConfig& c, const PreparedData& data, const FeatureMatrix& x, MethodResult& r) {
    Rng rng(stream(c, "decoder"));
    nn::MlpDecoder decoder(decoder_config(c, x.values.cols()), rng);
    nn::MlpTrainOptions opts;
    opts.epochs = decoder_epochs(c);
    opts.lr = c.real("learning_rate");
    opts.class_weighting = c.class_weighting;
    opts.validation_rows = data.validation_rows;
    r.log = nn::train_mlp(decoder, x.values, data.labels, data.train_rows, opts);
    const nn::Tensor logits = decoder.forward(nn::Tensor::constant(x.values));
    r.scores = nn::positive_class_probability(logits.value());
    r.params = decoder.params();
}

void train_graph(const RunConfig& c, const PreparedData& data, const FeatureMatrix& x, MethodResult& r) {
    const gnn::GnnConfig g = gnn_config(c);
    const gnn::GraphStructure s = gnn::build_structure(data.dataset->graph, g.directed_mp);
    gnn::GnnTrainInputs in;
    in.features = &x.values;
    in.structure = &s;
    in.labels = data.labels;
    in.train_rows = data.train_rows;
    in.validation_rows = data.validation_rows;
    auto trained = gnn::train_gnn(g, in);
    r.scores = gnn::predict(trained.model, x.values, s);
    r.log = std::move(trained.log);
    r.params = trained.model.params();
}

}  // namespace

MethodResult train_eval(const RunConfig& c, const PreparedData& data, const TrainEvalOptions& options) {
    if (!data.dataset) throw std::invalid_argument("train_eval: data not prepared");
    c.validate();
    MethodResult r;
    r.config = c;
    try {
        FeatureArtifacts local;
        const FeatureArtifacts& artifacts = options.artifacts ? *options.artifacts : (local = build_artifacts(c, data));
        r.skipgram_loss = artifacts.skipgram_loss;
        const FeatureMatrix x = assemble_features(c, data, artifacts);
        r.columns = x.columns;
        r.column_hash = x.column_hash();
        if (is_gnn(c.method)) train_graph(c, data, x, r);
        else train_tabular(c, data, x, r);
    } catch (const DataError&) {
        throw;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw TrainingError(std::string(to_string(c.method)) + ": " + e.what());
    }
    if (!std::all_of(r.scores.begin(), r.scores.end(), [](double s) { return std::isfinite(s); }))
        throw TrainingError(std::string(to_string(c.method)) + ": non-finite scores");

    r.validation_auc_pr = validation_auc_pr(r.scores, data);
    if (options.evaluate_test) {
        const auto labels = labels_of(data);
        r.test_scored = make_scored(r.scores, labels, data.test_rows);
        const auto thresholds = parse_thresholds(c.thresholds, data.train_prevalence_percent);
        const std::uint64_t seed = stream(c, "variance");
        r.report = is_gnn(c.method) ? mask_halving_report(r.test_scored, thresholds, c.resamples, seed)
                                    : bootstrap_report(r.test_scored, thresholds, c.resamples, seed);
    }
    return r;
}

Objective make_objective(const RunConfig& base, const PreparedData& data) {
    struct Cache {
        std::mutex mutex;
        std::optional<ManualFeatureSet> manual;  // PageRank column recomputed per trial
    };
    auto cache = std::make_shared<Cache>();
    return [base, &data, cache](const TrialConfig& trial, std::uint64_t seed) {
        RunConfig c = base;
        c.apply(trial);
        c.seed = seed;
        c.threads = 1;
        c.validate();
        TrainEvalOptions opts;
        opts.evaluate_test = false;
        FeatureArtifacts artifacts;
        if (c.method == Method::Manual) {
            {
                std::lock_guard lock(cache->mutex);
                if (!cache->manual) {
                    // Trial-independent columns use the base seed so every
                    // trial sees the same betweenness sample.
                    cache->manual = compute_manual_features(data.dataset->graph, manual_config(base));
                }
                artifacts.manual = cache->manual;
            }
            const ManualFeatureConfig mc = manual_config(c);
            artifacts.manual->pagerank =
                pagerank(data.dataset->graph, mc.pagerank_alpha,
                         {.tol = mc.pagerank_tol, .max_iter = mc.pagerank_max_iter, .start = {}})
                    .values;
            opts.artifacts = &artifacts;
        }
        return train_eval(c, data, opts).validation_auc_pr;
    };
}

std::string timestamp_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    localtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
    return buf;
}

std::filesystem::path write_run_directory(const std::filesystem::path& out_root, const std::string& stamp,
                                          const MethodResult& r, const PreparedData& data) {
    namespace fs = std::filesystem;
    const std::string base = stamp + "-" + to_string(r.config.method);
    fs::path dir = out_root / base;
    for (int k = 2; fs::exists(dir); ++k) dir = out_root / (base + "-" + std::to_string(k));
    fs::create_directories(dir);

    std::ofstream(dir / "config") << r.config.to_text();
    {
        std::ofstream m(dir / "manifest");
        m << data.manifest_text << "manifest_hash=" << data.manifest_hash << '\n'
          << "tool_version=" << kToolVersion << '\n'
          << "seed=" << r.config.seed << '\n'
          << "feature_columns=" << r.columns.size() << '\n'
          << "feature_column_hash=" << r.column_hash << '\n'
          << "validation_auc_pr=" << std::setprecision(17) << r.validation_auc_pr << '\n';
    }
    write_report_csv(dir / "metrics.csv", to_string(r.config.method), r.report);
    {
        std::ofstream log(dir / "log.csv");
        log << "epoch,train_loss,val_loss,val_auc_pr\n" << std::setprecision(17);
        for (const auto& row : r.log)
            log << row.epoch << ',' << row.train_loss << ',' << row.val_loss << ',' << row.val_auc_pr << '\n';
    }
    if (!r.skipgram_loss.empty()) {
        std::ofstream sg(dir / "skipgram_loss.csv");
        sg << "epoch,loss\n" << std::setprecision(17);
        for (std::size_t e = 0; e < r.skipgram_loss.size(); ++e) sg << e + 1 << ',' << r.skipgram_loss[e] << '\n';
    }
    nn::save_checkpoint(dir / "checkpoint", r.params);
    if (!r.test_scored.empty()) write_curves_csv(dir / "curves.csv", to_string(r.config.method), r.test_scored);
    return dir;
}

std::vector<BenchmarkRow> benchmark_all(const std::vector<RunConfig>& configs, const PreparedData& data,
                                        const std::function<void(const BenchmarkRow&)>& on_row) {
    std::vector<BenchmarkRow> rows;
    for (const auto& c : configs) {
        BenchmarkRow row;
        row.method = c.method;
        try {
            row.result = train_eval(c, data);
            row.ok = true;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        if (on_row) on_row(row);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_benchmark_table(const std::vector<BenchmarkRow>& rows, const std::vector<std::string>& metrics) {
    std::vector<std::pair<std::string, EvalReport>> table;
    for (const auto& row : rows) table.emplace_back(to_string(row.method), row.ok ? row.result.report : EvalReport{});
    return format_report_table(table, metrics);
}

}  // namespace amlbench
