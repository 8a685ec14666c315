#include "amlbench/pipeline.hpp"

#include "support/synthetic.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace amlbench;
using amlbench::testing::TempDir;
namespace fs = std::filesystem;

namespace {

const Dataset& synthetic() {
    static const Dataset ds = testing::make_synthetic({.nodes_per_step = 20, .seed = 5});
    return ds;
}

const PreparedData& prepared() {
    static const PreparedData data = prepare(synthetic());
    return data;
}

// Tuned config with short training so the whole suite stays fast.
RunConfig quick(Method m) {
    RunConfig c = RunConfig::defaults(m);
    c.resamples = 10;
    c.betweenness_pivots = 0;
    c.eigenvector_max_iter = 100000;  // the synthetic components have close leading eigenvalues
    if (is_gnn(m)) {
        c.set("number_of_epochs", "20");
    } else {
        c.set("number_of_epochs_decoder", "30");
        if (is_walk(m)) c.set("number_of_epochs", "5");
    }
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(AMLBENCH_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("method names and predicates") {
    CHECK(all_methods().size() == 10);
    for (Method m : all_methods()) CHECK(parse_method(to_string(m)) == m);
    CHECK(parse_method("sage") == Method::GraphSage);
    CHECK(parse_method("egonet") == Method::Manual);
    CHECK_FALSE(parse_method("svm").has_value());
    CHECK(is_gnn(Method::Gin));
    CHECK_FALSE(is_gnn(Method::Manual));
    CHECK(is_walk(Method::Node2VecNi));
    CHECK_FALSE(uses_intrinsic(Method::DeepWalkNi));
    CHECK(uses_intrinsic(Method::DeepWalk));
}

TEST_CASE("run configs") {
    for (Method m : all_methods()) {
        const RunConfig c = RunConfig::defaults(m);
        CHECK_NOTHROW(c.validate());
        CHECK(HyperSpace::for_method(to_string(m)).violation(c.hyper).empty());
        const RunConfig back = RunConfig::parse(c.to_text());
        CHECK(back.to_text() == c.to_text());
        CHECK(back.method == m);
    }
    CHECK(RunConfig::defaults(Method::Gcn).feature_set == FeatureSet::Local94);

    SUBCASE("parsing") {
        const auto c = RunConfig::parse("# tuned\nmethod = graphsage\nseed=4  # trailing\naggregator=min\n");
        CHECK(c.method == Method::GraphSage);
        CHECK(c.seed == 4);
        CHECK(as_string(c.hyper.at("aggregator")) == "min");
        // The caller's method wins over the file's.
        CHECK(RunConfig::parse("method=gcn\n", Method::Gin).method == Method::Gin);
    }
    SUBCASE("errors name the line") {
        auto message = [](const std::string& text) {
            try {
                RunConfig::parse(text);
            } catch (const ConfigError& e) {
                return std::string(e.what());
            }
            return std::string("accepted");
        };
        CHECK(message("method=gcn\nnumber_of_heads=2\n").find("line 2") != std::string::npos);
        CHECK(message("method=gcn\nlearning_rate=0.5\n").find("out of range") != std::string::npos);
        CHECK(message("method=gcn\ngnn_layers=2.5\n").find("line 2") != std::string::npos);
        CHECK(message("just words\n").find("line 1") != std::string::npos);
        CHECK(message("method=svm\n").find("unknown method") != std::string::npos);
        CHECK(message("feature_set=12\n").find("feature_set") != std::string::npos);
        CHECK(message("class_weighting=maybe\n").find("true/false") != std::string::npos);
        CHECK(message("method=manual\neigenvector_tol=-1\n").find("positive") != std::string::npos);
        CHECK(message("method=manual\neigenvector_max_iter=0\n").find("positive") != std::string::npos);
        CHECK_THROWS_AS(RunConfig::load("/nonexistent/config"), ConfigError);
    }
    SUBCASE("eigenvector limits reach the feature config") {
        const auto c = RunConfig::parse("method=manual\neigenvector_tol=1e-10\neigenvector_max_iter=5000\n");
        CHECK(manual_config(c).eigenvector_tol == 1e-10);
        CHECK(manual_config(c).eigenvector_max_iter == 5000);
        CHECK(RunConfig::parse(c.to_text()).to_text() == c.to_text());
        CHECK(manual_config(RunConfig::defaults(Method::Manual)).eigenvector_max_iter == 1000);
    }
    SUBCASE("trial application") {
        RunConfig c = RunConfig::defaults(Method::Manual);
        c.apply({{"random_jump_parameter", 0.3}});
        CHECK(manual_config(c).pagerank_alpha == 0.3);
        CHECK_THROWS_AS(c.apply({{"random_jump_parameter", 0.95}}), ConfigError);
        CHECK_THROWS_AS(c.apply({{"walk_length", std::int64_t{4}}}), ConfigError);
    }
    SUBCASE("typed views") {
        const RunConfig n = RunConfig::defaults(Method::Node2Vec);
        const WalkConfig w = walk_config(n);
        CHECK(w.p == 1.17);
        CHECK(w.q == 1.60);
        CHECK(decoder_config(n, 10).hidden_layers == 2);
        CHECK(decoder_config(n, 10).hidden_dim == 10);
        const RunConfig s = RunConfig::defaults(Method::GraphSage);
        CHECK(gnn_config(s).architecture == gnn::Architecture::Sage);
        CHECK(gnn_config(s).latent_dim == as_int(s.hyper.at("latent_dimension")));
    }
}

TEST_CASE("feature assembly") {
    const auto& data = prepared();
    auto columns_of = [&](const RunConfig& c) {
        const auto a = build_artifacts(c, data);
        return assemble_features(c, data, a);
    };
    CHECK(columns_of(quick(Method::Intrinsic)).columns.size() == 166);
    auto local = quick(Method::Intrinsic);
    local.feature_set = FeatureSet::Local94;
    CHECK(columns_of(local).columns.size() == 94);

    const auto manual = columns_of(quick(Method::Manual));
    REQUIRE(manual.columns.size() == 166 + 8);
    CHECK(manual.columns[166] == "manual_" + ManualFeatureSet::column_names()[0]);
    for (Eigen::Index k = 166; k < 174; ++k) {
        const auto col = manual.values.col(k);
        const double mean = col.mean();
        const double var = (col.array() - mean).square().mean();
        CHECK(std::abs(mean) < 1e-12);
        CHECK(std::abs(var - 1.0) < 1e-9);
    }
    CHECK(columns_of(quick(Method::DeepWalk)).columns.size() == 166 + 5);
    CHECK(columns_of(quick(Method::DeepWalkNi)).columns.size() == 5);
    const auto ni = columns_of(quick(Method::Node2VecNi));
    CHECK(ni.columns.size() == 47);
    CHECK(ni.columns.front() == "embedding_0");
    const auto gcn = columns_of(quick(Method::Gcn));
    CHECK(gcn.columns.size() == 94);
    CHECK(gcn.columns.back() == "local_93");
    CHECK(gcn.values.rows() == static_cast<Eigen::Index>(data.dataset->graph.num_nodes()));
    CHECK(gcn.column_hash() != manual.column_hash());
}

TEST_CASE("train and evaluate") {
    const auto& data = prepared();
    SUBCASE("tabular replay is bit-exact") {
        RunConfig c = quick(Method::Intrinsic);
        c.set("number_of_epochs_decoder", "497");  // the tuned value
        const auto a = train_eval(c, data);
        const auto b = train_eval(c, data);
        CHECK(a.scores == b.scores);
        CHECK(a.report.protocol == "bootstrap");
        CHECK(a.report.at("auc_pr").mean == b.report.at("auc_pr").mean);
        CHECK(a.validation_auc_pr == b.validation_auc_pr);
        CHECK(a.test_scored.size() == data.splits.test_counts.labelled);
        // The synthetic signal is learnable: clearly better than chance.
        CHECK(a.report.at("auc_roc").mean > 0.6);
    }
    SUBCASE("GNN uses mask halving") {
        const auto r = train_eval(quick(Method::Gcn), data);
        CHECK(r.report.protocol == "mask-halving");
        CHECK(r.log.size() == 20);
        CHECK(r.columns.size() == 94);
    }
    SUBCASE("tuning objective skips the test report and is deterministic") {
        const auto objective = make_objective(quick(Method::Manual), data);
        const TrialConfig trial = {{"random_jump_parameter", 0.4},
                                   {"number_of_layers_decoder", std::int64_t{1}},
                                   {"hidden_dimension_decoder", std::int64_t{8}},
                                   {"learning_rate", 0.03},
                                   {"number_of_epochs_decoder", std::int64_t{20}}};
        const double v = objective(trial, 17);
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
        CHECK(objective(trial, 17) == v);
    }
    SUBCASE("run directory") {
        TempDir dir("run");
        const auto r = train_eval(quick(Method::DeepWalk), data);
        const auto run = write_run_directory(dir.path(), "20260101-000000", r, data);
        CHECK(run.filename() == "20260101-000000-deepwalk");
        for (const char* f : {"config", "manifest", "metrics.csv", "log.csv", "checkpoint", "curves.csv",
                              "skipgram_loss.csv"})
            CHECK_MESSAGE(fs::exists(run / f), f);
        const auto manifest = slurp(run / "manifest");
        CHECK(manifest.find("manifest_hash=" + data.manifest_hash) != std::string::npos);
        CHECK(manifest.find("feature_column_hash=" + r.column_hash) != std::string::npos);
        CHECK(manifest.find(std::string("tool_version=") + kToolVersion) != std::string::npos);
        CHECK(RunConfig::load(run / "config").to_text() == r.config.to_text());
        const auto second = write_run_directory(dir.path(), "20260101-000000", r, data);
        CHECK(second.filename() == "20260101-000000-deepwalk-2");
    }
}

TEST_CASE("benchmark runs all ten methods") {
    std::vector<RunConfig> configs;
    for (Method m : all_methods()) configs.push_back(quick(m));
    int seen = 0;
    const auto rows = benchmark_all(configs, prepared(), [&](const BenchmarkRow&) { ++seen; });
    CHECK(seen == 10);
    REQUIRE(rows.size() == 10);
    for (const auto& row : rows) CHECK_MESSAGE(row.ok, to_string(row.method) << ": " << row.error);
    const auto table = format_benchmark_table(rows, metric_names(parse_thresholds("0.1,1,10,p", 10)));
    for (Method m : all_methods()) CHECK(table.find(to_string(m)) != std::string::npos);
}

TEST_CASE("command-line exit codes") {
    TempDir dir("cli");
    const auto data_dir = dir.path() / "data";
    testing::write_synthetic(data_dir, {.nodes_per_step = 6});
    const std::string d = " --dataset-dir " + data_dir.string();
    const std::string out = " --out " + (dir.path() / "runs").string();

    CHECK(run_cli("") == 1);
    CHECK(run_cli("--version") == 0);
    CHECK(run_cli("train-eval --method gcn") == 1);  // missing --dataset-dir
    CHECK(run_cli("train-eval --method svm" + d) == 1);
    CHECK(run_cli("train-eval --method gcn --dataset-dir " + (dir.path() / "absent").string()) == 2);
    CHECK(run_cli("ingest" + d) == 0);
    CHECK(run_cli("ingest" + d + out) == 0);
    CHECK(fs::exists(dir.path() / "runs" / "manifest"));

    std::ofstream(dir.path() / "bad.conf") << "method=gcn\nlearning_rate=3\n";
    CHECK(run_cli("train-eval --method gcn --config " + (dir.path() / "bad.conf").string() + d) == 1);

    std::ofstream(dir.path() / "quick.conf") << "number_of_epochs_decoder=10\nresamples=5\n";
    std::ofstream(dir.path() / "manual.conf") << "method=manual\nnumber_of_epochs_decoder=10\nresamples=5\n"
                                                 "betweenness_pivots=0\neigenvector_max_iter=1\n";
    // Non-convergence is reported as a training failure, not swallowed.
    CHECK(run_cli("train-eval --method manual --config " + (dir.path() / "manual.conf").string() + d + out) == 3);
    CHECK(run_cli("train-eval --method intrinsic --config " + (dir.path() / "quick.conf").string() + d + out) == 0);
    std::size_t runs = 0;
    for (const auto& e : fs::directory_iterator(dir.path() / "runs"))
        if (e.is_directory() && e.path().filename().string().ends_with("-intrinsic")) ++runs;
    CHECK(runs == 1);

    CHECK(run_cli("tune --method intrinsic --trials 3 --config " + (dir.path() / "quick.conf").string() + d + out) ==
          0);
    CHECK(run_cli("tune --method intrinsic --strategy grid" + d + out) == 1);
}
