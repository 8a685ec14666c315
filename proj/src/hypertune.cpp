#include "amlbench/hypertune.hpp"

#include "amlbench/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <stdexcept>

namespace amlbench {

std::string format_value(const ParamValue& value) {
    if (const auto* i = std::get_if<std::int64_t>(&value)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&value)) {
        // shortest text that reads back to the same double
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof buf, *d);
        return std::string(buf, res.ptr);
    }
    return std::get<std::string>(value);
}

double as_double(const ParamValue& value) {
    if (const auto* i = std::get_if<std::int64_t>(&value)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&value)) return *d;
    throw std::invalid_argument("categorical value '" + std::get<std::string>(value) + "' is not numeric");
}

std::int64_t as_int(const ParamValue& value) {
    if (const auto* i = std::get_if<std::int64_t>(&value)) return *i;
    if (const auto* d = std::get_if<double>(&value)) return static_cast<std::int64_t>(std::llround(*d));
    throw std::invalid_argument("categorical value '" + std::get<std::string>(value) + "' is not numeric");
}

const std::string& as_string(const ParamValue& value) {
    if (const auto* s = std::get_if<std::string>(&value)) return *s;
    throw std::invalid_argument("expected a categorical value, got " + format_value(value));
}

ParamSpec ParamSpec::integer(std::string name, std::int64_t low, std::int64_t high) {
    return {std::move(name), Kind::Integer, static_cast<double>(low), static_cast<double>(high), {}};
}

ParamSpec ParamSpec::real(std::string name, double low, double high) {
    return {std::move(name), Kind::Real, low, high, {}};
}

ParamSpec ParamSpec::categorical(std::string name, std::vector<std::string> choices) {
    return {std::move(name), Kind::Categorical, 0.0, 0.0, std::move(choices)};
}

bool ParamSpec::contains(const ParamValue& value) const {
    switch (kind) {
        case Kind::Integer: {
            const auto* i = std::get_if<std::int64_t>(&value);
            return i && static_cast<double>(*i) >= low && static_cast<double>(*i) <= high;
        }
        case Kind::Real: {
            if (std::holds_alternative<std::string>(value)) return false;
            const double d = as_double(value);
            return std::isfinite(d) && d >= low && d <= high;
        }
        case Kind::Categorical: {
            const auto* s = std::get_if<std::string>(&value);
            return s && std::find(choices.begin(), choices.end(), *s) != choices.end();
        }
    }
    return false;
}

ParamValue ParamSpec::parse(const std::string& text) const {
    try {
        std::size_t used = 0;
        switch (kind) {
            case Kind::Integer: {
                const long long v = std::stoll(text, &used);
                if (used != text.size()) break;
                return static_cast<std::int64_t>(v);
            }
            case Kind::Real: {
                const double v = std::stod(text, &used);
                if (used != text.size()) break;
                return v;
            }
            case Kind::Categorical:
                return text;
        }
    } catch (const std::logic_error&) {
    }
    throw std::invalid_argument("cannot parse '" + text + "' for " + name);
}

const ParamSpec* HyperSpace::find(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

std::string HyperSpace::violation(const TrialConfig& config) const {
    for (const auto& p : params_) {
        auto it = config.find(p.name);
        if (it == config.end()) return "missing " + p.name;
        if (!p.contains(it->second)) return p.name + "=" + format_value(it->second) + " is out of range";
    }
    return {};
}

namespace {

using P = ParamSpec;

bool is_gnn(const std::string& m) { return m == "gcn" || m == "graphsage" || m == "gat" || m == "gin"; }

std::vector<ParamSpec> walk_params(bool node2vec) {
    std::vector<ParamSpec> v = {
        P::integer("number_of_walks_per_node", 1, 3),
        P::integer("walk_length", 3, 10),
        P::integer("word2vec_context_window_size", 2, 10),
        P::integer("latent_dimension", 2, 64),
    };
    if (node2vec) {
        v.push_back(P::real("return_parameter", 0.5, 2.0));
        v.push_back(P::real("in_out_parameter", 0.5, 2.0));
    }
    v.push_back(P::integer("number_of_negative_samples", 1, 5));
    v.push_back(P::real("learning_rate", 0.01, 0.1));
    v.push_back(P::integer("number_of_epochs", 5, 500));
    v.push_back(P::integer("number_of_epochs_decoder", 5, 100));
    return v;
}

}  // namespace

HyperSpace HyperSpace::for_method(const std::string& method) {
    const auto lr = P::real("learning_rate", 0.01, 0.1);
    const auto dropout = P::real("dropout_rate", 0.0, 0.5);
    const auto epochs = P::integer("number_of_epochs", 5, 500);
    const auto gnn_latent = P::integer("latent_dimension", 32, 128);
    const auto gnn_layers = P::integer("gnn_layers", 1, 3);
    if (method == "intrinsic")
        return HyperSpace({P::integer("number_of_layers_decoder", 1, 3), P::integer("hidden_dimension_decoder", 5, 20),
                           lr, P::integer("number_of_epochs_decoder", 5, 500)});
    if (method == "manual")
        return HyperSpace({P::real("random_jump_parameter", 0.1, 0.9), P::integer("number_of_layers_decoder", 1, 3),
                           P::integer("hidden_dimension_decoder", 5, 20), lr,
                           P::integer("number_of_epochs_decoder", 5, 100)});
    if (method == "deepwalk" || method == "deepwalk-ni") return HyperSpace(walk_params(false));
    if (method == "node2vec" || method == "node2vec-ni") return HyperSpace(walk_params(true));
    if (method == "gcn")
        return HyperSpace({gnn_latent, P::integer("gnn_hidden_dimensions", 64, 256), gnn_layers, lr, dropout, epochs});
    if (method == "graphsage")
        return HyperSpace({gnn_latent, P::integer("gnn_hidden_dimensions", 64, 256), gnn_layers,
                           P::integer("number_of_neighbourhood_samples", 2, 5),
                           P::categorical("aggregator", {"min", "mean", "max"}), lr, dropout, epochs});
    if (method == "gat")
        return HyperSpace({gnn_latent, gnn_layers, P::integer("number_of_heads", 1, 5), lr, dropout, epochs});
    if (method == "gin") return HyperSpace({gnn_latent, gnn_layers, lr, dropout, epochs});
    throw std::invalid_argument("no search space for method '" + method + "'");
}

int default_budget(const std::string& method) {
    (void)HyperSpace::for_method(method);  // rejects unknown names
    return is_gnn(method) ? 100 : 50;
}

const char* to_string(SearchStrategy s) { return s == SearchStrategy::Random ? "random" : "tpe-lite"; }

std::optional<SearchStrategy> parse_strategy(const std::string& name) {
    if (name == "random") return SearchStrategy::Random;
    if (name == "tpe-lite" || name == "tpe") return SearchStrategy::TpeLite;
    return std::nullopt;
}

namespace {

ParamValue sample_uniform(const ParamSpec& p, Rng& rng) {
    switch (p.kind) {
        case ParamSpec::Kind::Integer:
            return rng.integer(static_cast<std::int64_t>(p.low), static_cast<std::int64_t>(p.high));
        case ParamSpec::Kind::Real:
            return rng.uniform(p.low, p.high);
        case ParamSpec::Kind::Categorical:
            return p.choices[rng.index(p.choices.size())];
    }
    return {};
}

TrialConfig sample_random(const HyperSpace& space, Rng& rng) {
    TrialConfig c;
    for (const auto& p : space.params()) c[p.name] = sample_uniform(p, rng);
    return c;
}

constexpr std::size_t kStartupTrials = 10;
constexpr int kCandidates = 24;
// Fraction of successful trials treated as good.
constexpr double kGoodFraction = 0.25;

// Numeric values are handled on the unit interval of their range.
double to_unit(const ParamSpec& p, const ParamValue& v) {
    return p.high > p.low ? (as_double(v) - p.low) / (p.high - p.low) : 0.5;
}

ParamValue from_unit(const ParamSpec& p, double u) {
    u = std::clamp(u, 0.0, 1.0);
    const double x = p.low + u * (p.high - p.low);
    if (p.kind == ParamSpec::Kind::Integer)
        return std::clamp<std::int64_t>(std::llround(x), static_cast<std::int64_t>(p.low),
                                        static_cast<std::int64_t>(p.high));
    return x;
}

// Parzen estimator: equal-weight Gaussians at the observations plus one
// uniform prior component, bandwidth from Scott's rule with a floor. The
// floor is wide (a tenth of the range) so a tight cluster of good trials
// still explores around itself instead of creeping along its edge.
struct Parzen {
    std::vector<double> centers;
    double bandwidth = 0.3;

    explicit Parzen(std::vector<double> c) : centers(std::move(c)) {
        const double m = static_cast<double>(centers.size());
        double sd = 0.29;  // std of U(0, 1), used when there is too little data
        if (centers.size() >= 2) {
            double mean = 0.0;
            for (double x : centers) mean += x;
            mean /= m;
            double ss = 0.0;
            for (double x : centers) ss += (x - mean) * (x - mean);
            sd = std::max(std::sqrt(ss / (m - 1.0)), 0.2);
        }
        bandwidth = std::clamp(1.06 * sd * std::pow(m + 1.0, -0.2), 0.1, 1.0);
    }

    double density(double u) const {
        const double k = 1.0 / (bandwidth * std::sqrt(2.0 * 3.14159265358979323846));
        double total = 1.0;  // the uniform prior
        for (double c : centers) {
            const double z = (u - c) / bandwidth;
            total += k * std::exp(-0.5 * z * z);
        }
        return total / (static_cast<double>(centers.size()) + 1.0);
    }

    double sample(Rng& rng) const {
        const std::size_t pick = rng.index(centers.size() + 1);
        if (pick == centers.size()) return rng.uniform();
        double u = centers[pick] + bandwidth * rng.normal();
        // reflect into [0, 1]
        for (int i = 0; i < 4 && (u < 0.0 || u > 1.0); ++i) u = u < 0.0 ? -u : 2.0 - u;
        return std::clamp(u, 0.0, 1.0);
    }
};

std::vector<double> categorical_mass(const ParamSpec& p, const std::vector<const TrialRecord*>& trials) {
    std::vector<double> mass(p.choices.size(), 1.0);
    for (const auto* t : trials) {
        const auto& v = as_string(t->config.at(p.name));
        for (std::size_t k = 0; k < p.choices.size(); ++k)
            if (p.choices[k] == v) mass[k] += 1.0;
    }
    double total = 0.0;
    for (double m : mass) total += m;
    for (double& m : mass) m /= total;
    return mass;
}

TrialConfig sample_tpe(const HyperSpace& space, std::span<const TrialRecord> history, Rng& rng) {
    std::vector<const TrialRecord*> ok;
    for (const auto& r : history)
        if (r.ok && space.violation(r.config).empty()) ok.push_back(&r);
    if (ok.size() < kStartupTrials) return sample_random(space, rng);

    std::stable_sort(ok.begin(), ok.end(),
                     [](const auto* a, const auto* b) { return a->val_auc_pr > b->val_auc_pr; });
    const auto n_good = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(kGoodFraction * static_cast<double>(ok.size()))));
    const std::vector<const TrialRecord*> good(ok.begin(), ok.begin() + static_cast<std::ptrdiff_t>(n_good));
    const std::vector<const TrialRecord*> bad(ok.begin() + static_cast<std::ptrdiff_t>(n_good), ok.end());

    TrialConfig best;
    double best_score = -std::numeric_limits<double>::infinity();
    std::vector<TrialConfig> candidates(kCandidates);
    std::vector<double> scores(kCandidates, 0.0);
    for (const auto& p : space.params()) {
        if (p.kind == ParamSpec::Kind::Categorical) {
            const auto l = categorical_mass(p, good);
            const auto g = categorical_mass(p, bad);
            for (int c = 0; c < kCandidates; ++c) {
                double u = rng.uniform(), acc = 0.0;
                std::size_t k = 0;
                for (; k + 1 < l.size(); ++k) {
                    acc += l[k];
                    if (u < acc) break;
                }
                candidates[static_cast<std::size_t>(c)][p.name] = p.choices[k];
                scores[static_cast<std::size_t>(c)] += std::log(l[k]) - std::log(g[k]);
            }
            continue;
        }
        std::vector<double> gu, bu;
        for (const auto* t : good) gu.push_back(to_unit(p, t->config.at(p.name)));
        for (const auto* t : bad) bu.push_back(to_unit(p, t->config.at(p.name)));
        const Parzen l(std::move(gu)), g(std::move(bu));
        for (int c = 0; c < kCandidates; ++c) {
            const ParamValue v = from_unit(p, l.sample(rng));
            const double u = to_unit(p, v);
            candidates[static_cast<std::size_t>(c)][p.name] = v;
            scores[static_cast<std::size_t>(c)] += std::log(l.density(u)) - std::log(g.density(u));
        }
    }
    for (int c = 0; c < kCandidates; ++c) {
        if (scores[static_cast<std::size_t>(c)] > best_score) {
            best_score = scores[static_cast<std::size_t>(c)];
            best = candidates[static_cast<std::size_t>(c)];
        }
    }
    return best;
}

}  // namespace

TrialConfig sample_trial(const HyperSpace& space, std::span<const TrialRecord> history, SearchStrategy strategy,
                         Rng& rng) {
    if (space.empty()) throw std::invalid_argument("sample_trial: empty search space");
    return strategy == SearchStrategy::Random ? sample_random(space, rng) : sample_tpe(space, history, rng);
}

std::uint64_t trial_seed(std::uint64_t search_seed, int trial_id) {
    return derive_seed(search_seed, {hash_name("trial"), static_cast<std::uint64_t>(trial_id)});
}

namespace {

std::uint64_t sampler_seed(std::uint64_t search_seed, int trial_id) {
    return derive_seed(search_seed, {hash_name("sampler"), static_cast<std::uint64_t>(trial_id)});
}

TrialRecord run_trial(const Objective& objective, TrialConfig config, int id, std::uint64_t search_seed) {
    TrialRecord r;
    r.trial_id = id;
    r.config = std::move(config);
    r.seed = trial_seed(search_seed, id);
    const auto start = std::chrono::steady_clock::now();
    try {
        r.val_auc_pr = objective(r.config, r.seed);
        r.ok = std::isfinite(r.val_auc_pr);
        if (!r.ok) r.error = "objective returned a non-finite value";
    } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

}  // namespace

SearchResult run_search(const HyperSpace& space, const Objective& objective, const SearchOptions& options) {
    if (options.budget < 1) throw std::invalid_argument("run_search: budget must be >= 1");
    if (space.empty()) throw std::invalid_argument("run_search: empty search space");
    SearchResult result;
    result.records.resize(static_cast<std::size_t>(options.budget));

    if (options.strategy == SearchStrategy::Random) {
        // Configurations depend only on (seed, trial id), so they can be drawn
        // up front and evaluated in any order.
        std::vector<TrialConfig> configs;
        for (int id = 0; id < options.budget; ++id) {
            Rng rng(sampler_seed(options.seed, id));
            configs.push_back(sample_random(space, rng));
        }
        std::mutex callback_mutex;
        parallel_chunks(configs.size(), std::max<std::size_t>(1, options.threads),
                        [&](std::size_t begin, std::size_t end, std::size_t) {
                            for (std::size_t k = begin; k < end; ++k) {
                                result.records[k] = run_trial(objective, configs[k], static_cast<int>(k), options.seed);
                                if (options.on_trial) {
                                    std::lock_guard lock(callback_mutex);
                                    options.on_trial(result.records[k]);
                                }
                            }
                        });
    } else {
        for (int id = 0; id < options.budget; ++id) {
            Rng rng(sampler_seed(options.seed, id));
            const auto history = std::span<const TrialRecord>(result.records.data(), static_cast<std::size_t>(id));
            auto& rec = result.records[static_cast<std::size_t>(id)];
            rec = run_trial(objective, sample_trial(space, history, options.strategy, rng), id, options.seed);
            if (options.on_trial) options.on_trial(rec);
        }
    }

    const TrialRecord* best = nullptr;
    for (const auto& r : result.records)
        if (r.ok && (!best || r.val_auc_pr > best->val_auc_pr)) best = &r;
    if (!best) {
        const std::string last = result.records.back().error;
        throw std::runtime_error("all " + std::to_string(options.budget) + " trials failed; last error: " + last);
    }
    result.best_record = *best;
    result.best = best->config;
    return result;
}

void write_ledger_csv(const std::filesystem::path& path, const HyperSpace& space,
                      std::span<const TrialRecord> records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "trial_id";
    for (const auto& p : space.params()) out << ',' << p.name;
    out << ",val_auc_pr,status,seconds,seed\n";
    char buf[64];
    for (const auto& r : records) {
        out << r.trial_id;
        for (const auto& p : space.params()) {
            auto it = r.config.find(p.name);
            out << ',' << (it == r.config.end() ? std::string() : format_value(it->second));
        }
        std::snprintf(buf, sizeof buf, "%.10g", r.val_auc_pr);
        out << ',' << (r.ok ? buf : "") << ',' << (r.ok ? "ok" : "failed");
        std::snprintf(buf, sizeof buf, "%.3f", r.seconds);
        out << ',' << buf << ',' << r.seed << '\n';
    }
}

void write_ledger_jsonl(const std::filesystem::path& path, std::span<const TrialRecord> records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["trial_id"] = r.trial_id;
        nlohmann::ordered_json params = nlohmann::ordered_json::object();
        for (const auto& [name, value] : r.config)
            std::visit([&, n = name](const auto& v) { params[n] = v; }, value);
        j["params"] = std::move(params);
        j["val_auc_pr"] = r.ok ? nlohmann::ordered_json(r.val_auc_pr) : nlohmann::ordered_json(nullptr);
        j["status"] = r.ok ? "ok" : "failed";
        if (!r.ok) j["error"] = r.error;
        j["seconds"] = r.seconds;
        j["seed"] = r.seed;
        out << j.dump() << '\n';
    }
}

}  // namespace amlbench
