#pragma once

// Goodness-of-fit helpers for the sampling tests.

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace amlbench::testing {

struct ChiSquare {
    double statistic = 0.0;
    double dof = 0.0;
    double p_value = 1.0;
};

/// Accumulates Pearson chi-square terms over several categorical samples and
/// tests the pooled statistic.
class ChiSquareAccumulator {
public:
    /// `counts[i]` observations of outcome i, expected with `probs[i]`.
    void add(const std::vector<double>& counts, const std::vector<double>& probs) {
        if (counts.size() != probs.size()) throw std::invalid_argument("size mismatch");
        double total = 0.0;
        for (double c : counts) total += c;
        if (total == 0.0) return;
        std::size_t cells = 0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            const double e = total * probs[i];
            if (e == 0.0) {
                if (counts[i] != 0.0) stat_ = INFINITY;
                continue;
            }
            stat_ += (counts[i] - e) * (counts[i] - e) / e;
            ++cells;
        }
        if (cells > 1) dof_ += static_cast<double>(cells - 1);
    }

    ChiSquare result() const {
        ChiSquare r{stat_, dof_, 1.0};
        if (dof_ > 0 && std::isfinite(stat_))
            r.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof_), stat_));
        else if (!std::isfinite(stat_))
            r.p_value = 0.0;
        return r;
    }

private:
    double stat_ = 0.0;
    double dof_ = 0.0;
};

/// Asymptotic p-value of the one-sample Kolmogorov-Smirnov test against
/// U[lo, hi].
inline double ks_uniform_p_value(std::vector<double> xs, double lo, double hi) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = (xs[i] - lo) / (hi - lo);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    if (lambda < 0.2) return 1.0;  // the alternating series is inaccurate here and Q is ~1
    double q = 0.0;
    for (int k = 1; k <= 100; ++k) q += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    return std::clamp(q, 0.0, 1.0);
}

}  // namespace amlbench::testing
