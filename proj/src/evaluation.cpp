#include "amlbench/evaluation.hpp"

#include "amlbench/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace amlbench {

std::vector<ScoredNode> make_scored(std::span<const double> scores, std::span<const Label> labels,
                                    std::span<const NodeId> rows) {
    std::vector<ScoredNode> out;
    out.reserve(rows.size());
    for (NodeId r : rows) {
        if (r >= scores.size() || r >= labels.size()) throw std::out_of_range("make_scored: row out of range");
        if (labels[r] == Label::Unknown) throw DataError("make_scored: node " + std::to_string(r) + " is unlabelled");
        if (!std::isfinite(scores[r])) throw DataError("make_scored: non-finite score at node " + std::to_string(r));
        out.push_back({r, scores[r], labels[r] == Label::Illicit});
    }
    return out;
}

namespace {

std::vector<ScoredNode> sorted_desc(std::span<const ScoredNode> scored) {
    std::vector<ScoredNode> v(scored.begin(), scored.end());
    std::sort(v.begin(), v.end(), [](const ScoredNode& a, const ScoredNode& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.node < b.node;
    });
    return v;
}

std::size_t count_positives(std::span<const ScoredNode> scored) {
    return static_cast<std::size_t>(
        std::count_if(scored.begin(), scored.end(), [](const ScoredNode& s) { return s.illicit; }));
}

}  // namespace

double auc_roc(std::span<const ScoredNode> scored) {
    const std::size_t pos = count_positives(scored);
    const std::size_t neg = scored.size() - pos;
    if (pos == 0 || neg == 0) throw std::invalid_argument("auc_roc: both classes must be present");
    std::vector<ScoredNode> v(scored.begin(), scored.end());
    std::sort(v.begin(), v.end(), [](const ScoredNode& a, const ScoredNode& b) { return a.score < b.score; });
    // Mann-Whitney U with mid-ranks; all partial sums are half-integers and
    // therefore exact in double for any realistic input size.
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < v.size()) {
        std::size_t j = i;
        while (j < v.size() && v[j].score == v[i].score) ++j;
        const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (v[k].illicit) rank_sum += mid_rank;
        i = j;
    }
    const double p = static_cast<double>(pos), n = static_cast<double>(neg);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double auc_pr(std::span<const ScoredNode> scored) {
    const std::size_t pos = count_positives(scored);
    if (pos == 0) throw std::invalid_argument("auc_pr: no positive examples");
    const auto v = sorted_desc(scored);
    double area = 0.0, prev_recall = 0.0;
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < v.size()) {
        std::size_t j = i;
        while (j < v.size() && v[j].score == v[i].score) {
            (v[j].illicit ? tp : fp) += 1;
            ++j;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return area;
}

ThresholdMetrics topk_metrics(std::span<const ScoredNode> scored, double k_percent) {
    if (!(k_percent > 0.0 && k_percent <= 100.0)) throw std::invalid_argument("topk_metrics: k must lie in (0, 100]");
    const std::size_t n = scored.size();
    // Round away representation noise before the ceiling (e.g. 10% of 30).
    const double raw = k_percent / 100.0 * static_cast<double>(n);
    const auto flagged = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
    if (flagged == 0) throw std::invalid_argument("topk_metrics: threshold flags no nodes");
    const auto v = sorted_desc(scored);
    const std::size_t positives = count_positives(scored);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < flagged; ++i) tp += v[i].illicit;
    ThresholdMetrics m;
    m.flagged = flagged;
    m.precision = static_cast<double>(tp) / static_cast<double>(flagged);
    m.recall = positives ? static_cast<double>(tp) / static_cast<double>(positives) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

std::vector<CurvePoint> pr_curve(std::span<const ScoredNode> scored) {
    const std::size_t pos = count_positives(scored);
    if (pos == 0) throw std::invalid_argument("pr_curve: no positive examples");
    const auto v = sorted_desc(scored);
    std::vector<CurvePoint> out;
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < v.size()) {
        std::size_t j = i;
        while (j < v.size() && v[j].score == v[i].score) {
            (v[j].illicit ? tp : fp) += 1;
            ++j;
        }
        out.push_back({v[i].score, static_cast<double>(tp) / static_cast<double>(pos),
                       static_cast<double>(tp) / static_cast<double>(tp + fp)});
        i = j;
    }
    return out;
}

std::vector<CurvePoint> roc_curve(std::span<const ScoredNode> scored) {
    const std::size_t pos = count_positives(scored);
    const std::size_t neg = scored.size() - pos;
    if (pos == 0 || neg == 0) throw std::invalid_argument("roc_curve: both classes must be present");
    const auto v = sorted_desc(scored);
    std::vector<CurvePoint> out{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < v.size()) {
        std::size_t j = i;
        while (j < v.size() && v[j].score == v[i].score) {
            (v[j].illicit ? tp : fp) += 1;
            ++j;
        }
        out.push_back({v[i].score, static_cast<double>(fp) / static_cast<double>(neg),
                       static_cast<double>(tp) / static_cast<double>(pos)});
        i = j;
    }
    return out;
}

std::vector<Threshold> parse_thresholds(const std::string& spec, double prevalence_percent) {
    std::vector<Threshold> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }),
                   item.end());
        if (!item.empty() && item.back() == '%') item.pop_back();
        if (item.empty()) continue;
        if (item == "p") {
            out.push_back({"p", prevalence_percent});
            continue;
        }
        std::size_t used = 0;
        double k = 0.0;
        try {
            k = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || !(k > 0.0 && k <= 100.0))
            throw std::invalid_argument("invalid threshold '" + item + "'");
        out.push_back({item + "%", k});
    }
    if (out.empty()) throw std::invalid_argument("no thresholds given");
    return out;
}

const MetricSummary& EvalReport::at(const std::string& name) const {
    for (const auto& [k, v] : metrics)
        if (k == name) return v;
    throw std::out_of_range("metric not in report: " + name);
}

bool EvalReport::has(const std::string& name) const {
    return std::any_of(metrics.begin(), metrics.end(), [&](const auto& kv) { return kv.first == name; });
}

std::vector<std::string> metric_names(std::span<const Threshold> thresholds) {
    std::vector<std::string> names{"auc_roc", "auc_pr"};
    for (const auto& t : thresholds) {
        names.push_back("precision@" + t.label);
        names.push_back("recall@" + t.label);
        names.push_back("f1@" + t.label);
    }
    return names;
}

namespace {

std::vector<double> metric_values(std::span<const ScoredNode> scored, std::span<const Threshold> thresholds) {
    std::vector<double> out{auc_roc(scored), auc_pr(scored)};
    for (const auto& t : thresholds) {
        const auto m = topk_metrics(scored, t.percent);
        out.push_back(m.precision);
        out.push_back(m.recall);
        out.push_back(m.f1);
    }
    return out;
}

bool has_both_classes(std::span<const ScoredNode> s) {
    const std::size_t pos = count_positives(s);
    return pos > 0 && pos < s.size();
}

EvalReport summarise(std::string protocol, std::span<const Threshold> thresholds,
                     const std::vector<std::vector<double>>& samples, std::size_t redraws) {
    EvalReport r;
    r.protocol = std::move(protocol);
    r.repetitions = samples.size();
    r.redraws = redraws;
    r.thresholds.assign(thresholds.begin(), thresholds.end());
    const auto names = metric_names(thresholds);
    for (std::size_t m = 0; m < names.size(); ++m) {
        double mean = 0.0;
        for (const auto& s : samples) mean += s[m];
        mean /= static_cast<double>(samples.size());
        double var = 0.0;
        for (const auto& s : samples) var += (s[m] - mean) * (s[m] - mean);
        const double sd = samples.size() > 1 ? std::sqrt(var / static_cast<double>(samples.size() - 1)) : 0.0;
        r.metrics.emplace_back(names[m], MetricSummary{mean, sd});
    }
    return r;
}

constexpr std::size_t kMaxRedrawsPerRepetition = 1000;

}  // namespace

EvalReport evaluate_once(std::span<const ScoredNode> scored, std::span<const Threshold> thresholds) {
    return summarise("single", thresholds, {metric_values(scored, thresholds)}, 0);
}

EvalReport bootstrap_report(std::span<const ScoredNode> scored, std::span<const Threshold> thresholds,
                            std::size_t repetitions, std::uint64_t seed) {
    if (repetitions < 2) throw std::invalid_argument("bootstrap_report: repetitions must be >= 2");
    if (!has_both_classes(scored)) throw std::invalid_argument("bootstrap_report: both classes must be present");
    const std::size_t n = scored.size();
    std::vector<std::vector<double>> samples;
    std::vector<ScoredNode> resample(n);
    std::size_t redraws = 0;
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
        for (std::size_t attempt = 0;; ++attempt) {
            if (attempt == kMaxRedrawsPerRepetition)
                throw std::runtime_error("bootstrap_report: could not draw a resample with both classes");
            Rng rng(derive_seed(seed, {hash_name("bootstrap"), rep, attempt}));
            for (auto& s : resample) s = scored[rng.index(n)];
            if (has_both_classes(resample)) break;
            ++redraws;
        }
        samples.push_back(metric_values(resample, thresholds));
    }
    return summarise("bootstrap", thresholds, samples, redraws);
}

EvalReport mask_halving_report(std::span<const ScoredNode> scored, std::span<const Threshold> thresholds,
                               std::size_t repetitions, std::uint64_t seed) {
    if (repetitions < 1) throw std::invalid_argument("mask_halving_report: repetitions must be >= 1");
    const std::size_t n = scored.size();
    if (n < 4) throw std::invalid_argument("mask_halving_report: at least 4 labelled nodes required");
    if (!has_both_classes(scored)) throw std::invalid_argument("mask_halving_report: both classes must be present");
    const std::size_t half = n / 2;
    std::vector<std::vector<double>> samples;
    std::vector<std::size_t> perm(n);
    std::vector<ScoredNode> subset(half);
    std::size_t redraws = 0;
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
        for (std::size_t attempt = 0;; ++attempt) {
            if (attempt == kMaxRedrawsPerRepetition)
                throw std::runtime_error("mask_halving_report: could not draw a half with both classes");
            Rng rng(derive_seed(seed, {hash_name("mask-halving"), rep, attempt}));
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            for (std::size_t i = 0; i < half; ++i) std::swap(perm[i], perm[i + rng.index(n - i)]);
            std::sort(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(half));
            for (std::size_t i = 0; i < half; ++i) subset[i] = scored[perm[i]];
            if (has_both_classes(subset)) break;
            ++redraws;
        }
        samples.push_back(metric_values(subset, thresholds));
    }
    return summarise("mask-halving", thresholds, samples, redraws);
}

void write_report_csv(const std::filesystem::path& path, const std::string& method, const EvalReport& report,
                      bool append) {
    const bool header = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    if (header) out << "method,metric,mean,std\n";
    out << std::setprecision(17);
    for (const auto& [name, s] : report.metrics) out << method << ',' << name << ',' << s.mean << ',' << s.std << '\n';
}

std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows,
                                const std::vector<std::string>& metrics) {
    std::ostringstream out;
    std::size_t name_width = 7;
    for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size());
    out << std::left << std::setw(static_cast<int>(name_width)) << "Methods";
    for (const auto& m : metrics) out << " | " << std::setw(19) << m;
    out << '\n' << std::string(name_width + metrics.size() * 22, '-') << '\n';
    for (const auto& [name, report] : rows) {
        out << std::left << std::setw(static_cast<int>(name_width)) << name;
        for (const auto& m : metrics) {
            std::ostringstream cell;
            if (report.has(m)) {
                const auto& s = report.at(m);
                cell << std::fixed << std::setprecision(4) << s.mean << " ± " << s.std;
            } else {
                cell << "failed";
            }
            // "±" is two bytes in UTF-8 but one column wide.
            out << " | " << std::setw(20) << cell.str();
        }
        out << '\n';
    }
    return out.str();
}

void write_curves_csv(const std::filesystem::path& path, const std::string& method,
                      std::span<const ScoredNode> scored, bool append) {
    const bool header = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    if (header) out << "method,curve,threshold,x,y\n";
    out << std::setprecision(17);
    for (const auto& p : pr_curve(scored)) out << method << ",pr," << p.threshold << ',' << p.x << ',' << p.y << '\n';
    for (const auto& p : roc_curve(scored)) out << method << ",roc," << p.threshold << ',' << p.x << ',' << p.y << '\n';
}

}  // namespace amlbench
