// Command-line front end: ingest, featurize, train-eval, tune, benchmark.

#include "amlbench/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace amlbench;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kTraining = 3 };

struct CommonFlags {
    std::string dataset_dir;
    std::string method;
    std::uint64_t seed = 0;
    std::string config;
    std::string out = "runs";
    std::size_t threads = 1;
    std::string thresholds;
    std::size_t resamples = 0;

    CLI::Option* seed_opt = nullptr;
    CLI::Option* threads_opt = nullptr;
};

void add_dataset(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--dataset-dir", f.dataset_dir, "Directory with the Elliptic CSV triplet")->required();
}

void add_run_flags(CLI::App* cmd, CommonFlags& f, bool method_required) {
    auto* m = cmd->add_option("--method", f.method, "intrinsic, manual, deepwalk, deepwalk-ni, node2vec, "
                                                    "node2vec-ni, gcn, graphsage, gat or gin");
    if (method_required) m->required();
    f.seed_opt = cmd->add_option("--seed", f.seed, "Run seed");
    cmd->add_option("--config", f.config, "Flat key=value run config");
    cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
    f.threads_opt = cmd->add_option("--threads", f.threads, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--thresholds", f.thresholds, "Top-k% cuts, e.g. 0.1,1,10,p");
    cmd->add_option("--resamples", f.resamples, "Bootstrap / mask-halving repetitions");
}

Method require_method(const std::string& name) {
    const auto m = parse_method(name);
    if (!m) throw ConfigError("unknown method '" + name + "'");
    return *m;
}

RunConfig resolve_config(const CommonFlags& f, std::optional<Method> method) {
    RunConfig c = f.config.empty() ? RunConfig::defaults(method.value_or(Method::Intrinsic))
                                   : RunConfig::load(f.config, method);
    if (!f.dataset_dir.empty()) c.dataset_dir = f.dataset_dir;
    if (f.seed_opt && f.seed_opt->count()) c.seed = f.seed;
    if (f.threads_opt && f.threads_opt->count()) c.threads = f.threads;
    if (!f.thresholds.empty()) c.set("thresholds", f.thresholds);
    if (f.resamples) c.resamples = f.resamples;
    c.validate();
    return c;
}

std::vector<std::string> report_metrics(const RunConfig& c, const PreparedData& data) {
    const auto t = parse_thresholds(c.thresholds, data.train_prevalence_percent);
    return metric_names(t);
}

int cmd_ingest(const CommonFlags& f, bool write) {
    const Dataset ds = load_dataset(f.dataset_dir);
    const std::string manifest = make_manifest(ds).to_text();
    std::cout << manifest;
    for (const auto& m : canonical_mismatches(ds)) std::cerr << "note: " << m << '\n';
    if (write) {
        fs::create_directories(f.out);
        std::ofstream(fs::path(f.out) / "manifest") << manifest << "manifest_hash=" << hex_hash(manifest) << '\n'
                                                    << "tool_version=" << kToolVersion << '\n';
        std::cout << "wrote " << (fs::path(f.out) / "manifest").string() << '\n';
    }
    return kOk;
}

int cmd_featurize(const CommonFlags& f) {
    const RunConfig c = resolve_config(f, require_method(f.method));
    const Dataset ds = load_dataset(c.dataset_dir);
    const PreparedData data = prepare(ds);
    const FeatureArtifacts a = build_artifacts(c, data);
    const FeatureMatrix x = assemble_features(c, data, a);
    const fs::path dir = fs::path(f.out) / (std::string("features-") + to_string(c.method));
    fs::create_directories(dir);
    if (a.manual) write_manual_features_csv(dir / "manual_features.csv", ds.graph, *a.manual);
    if (a.embedding) write_embedding_csv(dir / "embedding.csv", ds.graph, *a.embedding);
    {
        std::ofstream cols(dir / "feature_columns.txt");
        for (const auto& name : x.columns) cols << name << '\n';
    }
    std::ofstream(dir / "config") << c.to_text();
    std::cout << x.columns.size() << " feature columns (hash " << x.column_hash() << ") in " << dir.string() << '\n';
    return kOk;
}

int cmd_train_eval(const CommonFlags& f) {
    const RunConfig c = resolve_config(f, require_method(f.method));
    const Dataset ds = load_dataset(c.dataset_dir);
    const PreparedData data = prepare(ds);
    const MethodResult r = train_eval(c, data);
    const fs::path dir = write_run_directory(f.out, timestamp_now(), r, data);
    std::cout << format_report_table({{to_string(c.method), r.report}}, report_metrics(c, data));
    std::cout << "run directory: " << dir.string() << '\n';
    return kOk;
}

int cmd_tune(const CommonFlags& f, int trials, const std::string& strategy_name) {
    const Method method = require_method(f.method);
    const RunConfig base = resolve_config(f, method);
    const auto strategy = parse_strategy(strategy_name);
    if (!strategy) throw ConfigError("unknown strategy '" + strategy_name + "'");
    const Dataset ds = load_dataset(base.dataset_dir);
    const PreparedData data = prepare(ds);

    SearchOptions opts;
    opts.budget = trials > 0 ? trials : default_budget(to_string(method));
    opts.strategy = *strategy;
    opts.seed = base.seed;
    opts.threads = base.threads;
    opts.on_trial = [&](const TrialRecord& r) {
        std::fprintf(stderr, "trial %3d  %s  val_auc_pr=%.4f  %.1fs%s%s\n", r.trial_id, r.ok ? "ok    " : "failed",
                     r.val_auc_pr, r.seconds, r.ok ? "" : "  ", r.error.c_str());
    };
    const HyperSpace space = HyperSpace::for_method(to_string(method));
    const SearchResult result = run_search(space, make_objective(base, data), opts);

    const fs::path dir = fs::path(f.out) / (timestamp_now() + "-tune-" + to_string(method));
    fs::create_directories(dir);
    write_ledger_csv(dir / "ledger.csv", space, result.records);
    write_ledger_jsonl(dir / "ledger.jsonl", result.records);
    RunConfig best = base;
    best.apply(result.best);
    std::ofstream(dir / "best.conf") << best.to_text();
    std::cout << "best trial " << result.best_record.trial_id << " val_auc_pr=" << result.best_record.val_auc_pr
              << "\nconfig: " << (dir / "best.conf").string() << '\n';
    return kOk;
}

int cmd_benchmark(const CommonFlags& f, const std::vector<std::string>& method_names, const std::string& config_dir) {
    std::vector<Method> methods;
    for (const auto& name : method_names) methods.push_back(require_method(name));
    if (methods.empty()) methods = all_methods();

    std::vector<RunConfig> configs;
    for (Method m : methods) {
        CommonFlags g = f;
        const fs::path tuned = config_dir.empty() ? fs::path() : fs::path(config_dir) / (std::string(to_string(m)) + ".conf");
        g.config = !tuned.empty() && fs::exists(tuned) ? tuned.string() : std::string();
        configs.push_back(resolve_config(g, m));
    }
    const Dataset ds = load_dataset(configs.front().dataset_dir);
    const PreparedData data = prepare(ds);

    const std::string stamp = timestamp_now();
    const fs::path dir = fs::path(f.out) / (stamp + "-benchmark");
    fs::create_directories(dir);
    bool first = true;
    const auto rows = benchmark_all(configs, data, [&](const BenchmarkRow& row) {
        if (!row.ok) {
            std::cerr << to_string(row.method) << " failed: " << row.error << '\n';
            return;
        }
        write_run_directory(dir, stamp, row.result, data);
        write_report_csv(dir / "results.csv", to_string(row.method), row.result.report, !first);
        write_curves_csv(dir / "curves.csv", to_string(row.method), row.result.test_scored, !first);
        first = false;
        std::cerr << to_string(row.method) << " done: auc_pr=" << row.result.report.at("auc_pr").mean << '\n';
    });
    const std::string table = format_benchmark_table(rows, report_metrics(configs.front(), data));
    std::ofstream(dir / "table.txt") << table;
    std::cout << table << "results: " << dir.string() << '\n';
    const bool all_ok = std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.ok; });
    return all_ok ? kOk : kTraining;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Network-analytics benchmark for illicit transaction detection"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    CommonFlags ingest_f, feat_f, train_f, tune_f, bench_f;
    bool ingest_write = false;
    int trials = 0;
    std::string strategy = "random";
    std::vector<std::string> bench_methods;
    std::string config_dir;

    auto* ingest = app.add_subcommand("ingest", "Load the dataset and print its manifest");
    add_dataset(ingest, ingest_f);
    ingest->add_option("--out", ingest_f.out, "Write the manifest into this directory");
    ingest->callback([&] { ingest_write = ingest->get_option("--out")->count() > 0; });

    auto* featurize = app.add_subcommand("featurize", "Compute and write a method's graph features");
    add_dataset(featurize, feat_f);
    add_run_flags(featurize, feat_f, true);

    auto* train = app.add_subcommand("train-eval", "Train one method and evaluate it on the test split");
    add_dataset(train, train_f);
    add_run_flags(train, train_f, true);

    auto* tune = app.add_subcommand("tune", "Search hyperparameters on validation AUC-PR");
    add_dataset(tune, tune_f);
    add_run_flags(tune, tune_f, true);
    tune->add_option("--trials", trials, "Trial budget (default: 50, or 100 for GNNs)");
    tune->add_option("--strategy", strategy, "random or tpe-lite")->capture_default_str();

    auto* bench = app.add_subcommand("benchmark", "Run every method and print the consolidated table");
    add_dataset(bench, bench_f);
    add_run_flags(bench, bench_f, false);
    bench->add_option("--methods", bench_methods, "Subset of methods (default: all ten)")->delimiter(',');
    bench->add_option("--config-dir", config_dir, "Directory of <method>.conf files from tuning");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*ingest) return cmd_ingest(ingest_f, ingest_write);
        if (*featurize) return cmd_featurize(feat_f);
        if (*train) return cmd_train_eval(train_f);
        if (*tune) return cmd_tune(tune_f, trials, strategy);
        if (*bench) {
            if (!bench_f.method.empty()) bench_methods.push_back(bench_f.method);
            return cmd_benchmark(bench_f, bench_methods, config_dir);
        }
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const TrainingError& e) {
        std::cerr << "training failure: " << e.what() << '\n';
        return kTraining;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "training failure: " << e.what() << '\n';
        return kTraining;
    }
    return kUsage;
}
