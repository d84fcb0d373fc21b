#pragma once

// Histogram accumulation and chi-squared goodness-of-fit reporting.
// Histograms over integer supports are mergeable monoids; cross-run
// aggregation always merges per-run histograms rather than sharing state.
//
// Two chi-squared entry points are provided. chi_squared() works on raw
// counts (N = histogram total). chi_squared_frequencies() first normalizes
// the observed histogram to a fixed total (default 100, i.e. percentage
// frequencies), which makes experiment reports comparable across run counts
// and measurement sizes; the experiment harness uses this form.

#include "decosim/result.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace decosim {

/// Counts per integer bin over [lo, hi], with out-of-support observations
/// tracked in underflow/overflow.
class Histogram {
public:
    Histogram(int lo, int hi) : lo_(lo), hi_(hi), counts_(static_cast<std::size_t>(hi - lo + 1), 0)
    {
        if (hi < lo) {
            throw SimError("histogram support is empty");
        }
    }

    void add(std::int64_t value, std::uint64_t count = 1)
    {
        if (value < lo_) {
            underflow_ += count;
        } else if (value > hi_) {
            overflow_ += count;
        } else {
            counts_[static_cast<std::size_t>(value - lo_)] += count;
        }
    }

    int lo() const { return lo_; }
    int hi() const { return hi_; }
    std::size_t bin_count() const { return counts_.size(); }
    std::uint64_t count(int value) const { return counts_[static_cast<std::size_t>(value - lo_)]; }
    const std::vector<std::uint64_t>& counts() const { return counts_; }
    std::uint64_t underflow() const { return underflow_; }
    std::uint64_t overflow() const { return overflow_; }

    std::uint64_t total() const
    {
        std::uint64_t t = underflow_ + overflow_;
        for (std::uint64_t c : counts_) {
            t += c;
        }
        return t;
    }

    /// Mean of in-support observations; NaN when empty.
    double in_support_mean() const
    {
        double sum = 0.0;
        std::uint64_t n = 0;
        for (std::size_t i = 0; i < counts_.size(); ++i) {
            sum += static_cast<double>(counts_[i]) * static_cast<double>(lo_ + static_cast<int>(i));
            n += counts_[i];
        }
        return n > 0 ? sum / static_cast<double>(n) : std::nan("");
    }

    bool operator==(const Histogram&) const = default;

private:
    int lo_;
    int hi_;
    std::vector<std::uint64_t> counts_;
    std::uint64_t underflow_ = 0;
    std::uint64_t overflow_ = 0;
};

/// Bin-wise sum. Throws SimError on support mismatch.
inline Histogram merge(const Histogram& a, const Histogram& b)
{
    if (a.lo() != b.lo() || a.hi() != b.hi()) {
        throw SimError("cannot merge histograms with different supports");
    }
    Histogram out(a.lo(), a.hi());
    for (int v = a.lo(); v <= a.hi(); ++v) {
        out.add(v, a.count(v) + b.count(v));
    }
    out.add(static_cast<std::int64_t>(a.lo()) - 1, a.underflow() + b.underflow());
    out.add(static_cast<std::int64_t>(a.hi()) + 1, a.overflow() + b.overflow());
    return out;
}

namespace detail {

// Chi-squared quantiles for dof 1..30: value x with P(X >= x) equal to the
// tail mass. Column 0: upper-tail mass 0.95; column 1: upper-tail mass 0.05.
inline constexpr std::array<std::array<double, 2>, 30> chi_squared_quantiles = {{
    {0.004, 3.841},  {0.103, 5.991},  {0.352, 7.815},  {0.711, 9.488},  {1.145, 11.070},
    {1.635, 12.592}, {2.167, 14.067}, {2.733, 15.507}, {3.325, 16.919}, {3.940, 18.307},
    {4.575, 19.675}, {5.226, 21.026}, {5.892, 22.362}, {6.571, 23.685}, {7.261, 24.996},
    {7.962, 26.296}, {8.672, 27.587}, {9.390, 28.869}, {10.117, 30.144}, {10.851, 31.410},
    {11.591, 32.671}, {12.338, 33.924}, {13.091, 35.172}, {13.848, 36.415}, {14.611, 37.652},
    {15.379, 38.885}, {16.151, 40.113}, {16.928, 41.337}, {17.708, 42.557}, {18.493, 43.773},
}};

} // namespace detail

/// Tabulated chi-squared critical value for dof in [1, 30] and upper-tail
/// mass 0.95 or 0.05. Throws SimError otherwise.
inline double critical_value(int dof, double upper_tail_mass)
{
    if (dof < 1 || dof > 30) {
        throw SimError("chi-squared critical value table covers dof 1..30, got "
                       + std::to_string(dof));
    }
    if (upper_tail_mass == 0.95) {
        return detail::chi_squared_quantiles[static_cast<std::size_t>(dof - 1)][0];
    }
    if (upper_tail_mass == 0.05) {
        return detail::chi_squared_quantiles[static_cast<std::size_t>(dof - 1)][1];
    }
    throw SimError("unsupported upper tail mass (use 0.95 or 0.05)");
}

struct ChiSquaredReport {
    double statistic = 0.0;
    int dof = 0;
    double critical_lower_0_95 = 0.0; // value with upper-tail mass 0.95
    double critical_upper_0_05 = 0.0; // value with upper-tail mass 0.05
    bool pass_paper_convention = false; // statistic < critical_lower_0_95
    bool pass_standard = false;         // statistic < critical_upper_0_05
    double scale = 0.0;                 // total the observed column sums to
    std::uint64_t observations = 0;     // raw observation count behind the test
};

namespace detail {

/// Core statistic on real-valued observed/expected columns. Bins whose
/// expected count is at most e_min are pooled into the previous kept bin
/// (the first bins pool forward), reducing the degrees of freedom.
inline ChiSquaredReport chi_squared_columns(const std::vector<double>& observed,
                                            const std::vector<double>& expected, double e_min,
                                            double scale, std::uint64_t observations)
{
    std::vector<double> pooled_observed;
    std::vector<double> pooled_expected;
    pooled_observed.reserve(observed.size());
    pooled_expected.reserve(expected.size());
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (!pooled_expected.empty() && expected[i] <= e_min) {
            pooled_observed.back() += observed[i];
            pooled_expected.back() += expected[i];
        } else {
            pooled_observed.push_back(observed[i]);
            pooled_expected.push_back(expected[i]);
        }
    }
    // A leading run of sub-threshold bins pooled forward into the first kept bin.
    while (pooled_expected.size() > 1 && pooled_expected.front() <= e_min) {
        pooled_observed[1] += pooled_observed[0];
        pooled_expected[1] += pooled_expected[0];
        pooled_observed.erase(pooled_observed.begin());
        pooled_expected.erase(pooled_expected.begin());
    }

    ChiSquaredReport report;
    for (std::size_t i = 0; i < pooled_expected.size(); ++i) {
        if (pooled_expected[i] > 0.0) {
            const double delta = pooled_observed[i] - pooled_expected[i];
            report.statistic += delta * delta / pooled_expected[i];
        }
    }
    report.dof = static_cast<int>(pooled_expected.size()) - 1;
    report.critical_lower_0_95 = critical_value(report.dof, 0.95);
    report.critical_upper_0_05 = critical_value(report.dof, 0.05);
    report.pass_paper_convention = report.statistic < report.critical_lower_0_95;
    report.pass_standard = report.statistic < report.critical_upper_0_05;
    report.scale = scale;
    report.observations = observations;
    return report;
}

inline void check_chi_squared_inputs(const Histogram& observed,
                                     const std::vector<double>& expected_probs)
{
    if (expected_probs.size() != observed.bin_count()) {
        throw SimError("expected probabilities cover " + std::to_string(expected_probs.size())
                       + " bins, histogram has " + std::to_string(observed.bin_count()));
    }
    double sum = 0.0;
    for (double p : expected_probs) {
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw SimError("expected probabilities sum to " + std::to_string(sum) + ", not 1");
    }
    if (observed.total() == 0) {
        throw SimError("chi-squared test over an empty histogram");
    }
}

} // namespace detail

/// Goodness of fit on raw counts: E_i = N * p_i with N the histogram total
/// (out-of-support observations count toward N, so mass escaping the support
/// worsens the fit). dof = bins used - 1 after pooling near-zero expectations.
inline ChiSquaredReport chi_squared(const Histogram& observed,
                                    const std::vector<double>& expected_probs)
{
    detail::check_chi_squared_inputs(observed, expected_probs);
    const double n = static_cast<double>(observed.total());
    std::vector<double> observed_column;
    std::vector<double> expected_column;
    observed_column.reserve(observed.bin_count());
    expected_column.reserve(observed.bin_count());
    for (std::size_t i = 0; i < observed.bin_count(); ++i) {
        observed_column.push_back(static_cast<double>(observed.counts()[i]));
        expected_column.push_back(n * expected_probs[i]);
    }
    return detail::chi_squared_columns(observed_column, expected_column, 1e-9 * n, n,
                                       observed.total());
}

/// Goodness of fit on normalized frequencies: the observed column is scaled
/// so its total (including out-of-support mass) is `scale`; E_i = scale * p_i.
/// With the default scale of 100 the columns are percentage frequencies.
inline ChiSquaredReport chi_squared_frequencies(const Histogram& observed,
                                                const std::vector<double>& expected_probs,
                                                double scale = 100.0)
{
    detail::check_chi_squared_inputs(observed, expected_probs);
    const double n = static_cast<double>(observed.total());
    std::vector<double> observed_column;
    std::vector<double> expected_column;
    observed_column.reserve(observed.bin_count());
    expected_column.reserve(observed.bin_count());
    for (std::size_t i = 0; i < observed.bin_count(); ++i) {
        observed_column.push_back(static_cast<double>(observed.counts()[i]) / n * scale);
        expected_column.push_back(scale * expected_probs[i]);
    }
    return detail::chi_squared_columns(observed_column, expected_column, 1e-9 * scale, scale,
                                       observed.total());
}

/// bin,observed,expected rows; expected at raw-count scale.
inline void write_histogram_csv(std::ostream& out, const Histogram& histogram,
                                const std::vector<double>& expected_probs)
{
    const double n = static_cast<double>(histogram.total());
    out << "bin,observed,expected\n";
    for (std::size_t i = 0; i < histogram.bin_count(); ++i) {
        const double expected =
            i < expected_probs.size() ? n * expected_probs[i] : 0.0;
        out << (histogram.lo() + static_cast<int>(i)) << ',' << histogram.counts()[i] << ','
            << expected << '\n';
    }
}

} // namespace decosim
