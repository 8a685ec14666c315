#pragma once

#include "amlbench/graph.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace amlbench {

struct ScoredNode {
    NodeId node = 0;
    double score = 0.0;
    bool illicit = false;
};

/// Scores of the labelled nodes in `rows`. Throws DataError if a row is
/// Unknown-labelled or its score is not finite.
std::vector<ScoredNode> make_scored(std::span<const double> scores, std::span<const Label> labels,
                                    std::span<const NodeId> rows);

/// Probability that a random illicit node outranks a random licit one, ties
/// counting one half. Throws std::invalid_argument unless both classes occur.
double auc_roc(std::span<const ScoredNode> scored);

/// Step-wise area under the precision-recall curve: sweeping distinct scores
/// from high to low, each recall increment is weighted by the precision
/// reached at that threshold. Throws std::invalid_argument without positives.
double auc_pr(std::span<const ScoredNode> scored);

struct ThresholdMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t flagged = 0;
};

/// Flags the ceil(k% * n) highest scores (ties: lower node index first).
ThresholdMetrics topk_metrics(std::span<const ScoredNode> scored, double k_percent);

struct CurvePoint {
    double threshold = 0.0;
    double x = 0.0;  // recall (PR) or false positive rate (ROC)
    double y = 0.0;  // precision (PR) or true positive rate (ROC)
};

std::vector<CurvePoint> pr_curve(std::span<const ScoredNode> scored);
std::vector<CurvePoint> roc_curve(std::span<const ScoredNode> scored);

/// A top-k% cut. `label` is what reports print ("1%", "p").
struct Threshold {
    std::string label;
    double percent = 0.0;
};

/// Parses "0.1,1,10,p"; "p" resolves to `prevalence_percent`.
std::vector<Threshold> parse_thresholds(const std::string& spec, double prevalence_percent);

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;
};

struct EvalReport {
    std::string protocol;  // "bootstrap", "mask-halving" or "single"
    std::size_t repetitions = 0;
    std::size_t redraws = 0;
    std::vector<Threshold> thresholds;
    /// Metric name -> summary, in report order.
    std::vector<std::pair<std::string, MetricSummary>> metrics;

    const MetricSummary& at(const std::string& name) const;
    bool has(const std::string& name) const;
};

/// Metric names reported for `thresholds`: auc_roc, auc_pr, then
/// precision@<label>, recall@<label>, f1@<label> per threshold.
std::vector<std::string> metric_names(std::span<const Threshold> thresholds);

/// All metrics on `scored` once (std 0).
EvalReport evaluate_once(std::span<const ScoredNode> scored, std::span<const Threshold> thresholds);

/// Resamples of the same size drawn with replacement; resamples missing a
/// class are redrawn and counted in `redraws`. Sample standard deviation.
EvalReport bootstrap_report(std::span<const ScoredNode> scored, std::span<const Threshold> thresholds,
                            std::size_t repetitions, std::uint64_t seed);

/// Each repetition scores a uniformly random half of the nodes (without
/// replacement). Requires at least 4 nodes.
EvalReport mask_halving_report(std::span<const ScoredNode> scored, std::span<const Threshold> thresholds,
                               std::size_t repetitions, std::uint64_t seed);

/// `method,metric,mean,std` rows; appends when `append` is set.
void write_report_csv(const std::filesystem::path& path, const std::string& method, const EvalReport& report,
                      bool append = false);

/// Fixed-width table with "mean ± std" cells, one row per method.
std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows,
                                const std::vector<std::string>& metrics);

void write_curves_csv(const std::filesystem::path& path, const std::string& method,
                      std::span<const ScoredNode> scored, bool append = false);

}  // namespace amlbench
