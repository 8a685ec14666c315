#pragma once

#include "amlbench/random.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace amlbench {

using ParamValue = std::variant<std::int64_t, double, std::string>;
/// One configuration, keyed by snake-case hyperparameter name.
using TrialConfig = std::map<std::string, ParamValue>;

std::string format_value(const ParamValue& value);
double as_double(const ParamValue& value);
std::int64_t as_int(const ParamValue& value);
const std::string& as_string(const ParamValue& value);

struct ParamSpec {
    enum class Kind { Integer, Real, Categorical };

    std::string name;
    Kind kind = Kind::Real;
    double low = 0.0;
    double high = 0.0;
    std::vector<std::string> choices;

    static ParamSpec integer(std::string name, std::int64_t low, std::int64_t high);
    static ParamSpec real(std::string name, double low, double high);
    static ParamSpec categorical(std::string name, std::vector<std::string> choices);

    bool contains(const ParamValue& value) const;
    /// Parses a text value into this parameter's type (no range check).
    ParamValue parse(const std::string& text) const;
};

class HyperSpace {
public:
    HyperSpace() = default;
    explicit HyperSpace(std::vector<ParamSpec> params) : params_(std::move(params)) {}

    /// Tuning ranges for a benchmark method name ("intrinsic", "manual",
    /// "deepwalk", "node2vec-ni", "gcn", ...). Throws on unknown methods.
    static HyperSpace for_method(const std::string& method);

    const std::vector<ParamSpec>& params() const { return params_; }
    const ParamSpec* find(const std::string& name) const;
    bool empty() const { return params_.empty(); }

    /// Empty string when `config` has every parameter in range, otherwise a
    /// description of the first violation.
    std::string violation(const TrialConfig& config) const;

private:
    std::vector<ParamSpec> params_;
};

/// Trial budget per method: 100 for the GNNs, 50 otherwise.
int default_budget(const std::string& method);

enum class SearchStrategy { Random, TpeLite };

const char* to_string(SearchStrategy s);
std::optional<SearchStrategy> parse_strategy(const std::string& name);

struct TrialRecord {
    int trial_id = 0;
    TrialConfig config;
    double val_auc_pr = 0.0;
    double seconds = 0.0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
};

/// `Random` ignores history. `TpeLite` starts with random draws and, once ten
/// trials succeeded, splits them into the best quarter (good) and the rest
/// (bad) and picks, among candidates drawn around good trials, the one with the
/// largest good/bad density ratio.
TrialConfig sample_trial(const HyperSpace& space, std::span<const TrialRecord> history, SearchStrategy strategy,
                         Rng& rng);

/// Trains and scores one configuration; returns validation AUC-PR.
using Objective = std::function<double(const TrialConfig& config, std::uint64_t trial_seed)>;

struct SearchResult {
    TrialConfig best;
    TrialRecord best_record;
    std::vector<TrialRecord> records;
};

struct SearchOptions {
    int budget = 50;
    SearchStrategy strategy = SearchStrategy::Random;
    std::uint64_t seed = 0;
    /// Concurrent trials; only honoured by the random strategy.
    std::size_t threads = 1;
    /// Called after each finished trial (from the worker that ran it).
    std::function<void(const TrialRecord&)> on_trial;
};

/// Runs `budget` trials and returns the argmax of validation AUC-PR over the
/// trials that succeeded. Trial seeds are derived from (seed, trial id).
/// Throws std::runtime_error if every trial failed.
SearchResult run_search(const HyperSpace& space, const Objective& objective, const SearchOptions& options);

std::uint64_t trial_seed(std::uint64_t search_seed, int trial_id);

/// trial_id,<params...>,val_auc_pr,status,seconds,seed
void write_ledger_csv(const std::filesystem::path& path, const HyperSpace& space,
                      std::span<const TrialRecord> records);
/// One JSON object per trial.
void write_ledger_jsonl(const std::filesystem::path& path, std::span<const TrialRecord> records);

}  // namespace amlbench
