#include "decosim/rng.hpp"
#include "decosim/stats.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

using namespace decosim;

namespace {

// Regularized lower incomplete gamma P(a, x), series + continued fraction.
// Test-only oracle for chi-squared quantiles, independent of the embedded
// table.
double lower_incomplete_gamma_regularized(double a, double x)
{
    if (x <= 0.0) {
        return 0.0;
    }
    const double log_gamma_a = std::lgamma(a);
    if (x < a + 1.0) {
        double term = 1.0 / a;
        double sum = term;
        double ap = a;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-16) {
                break;
            }
        }
        return sum * std::exp(-x + a * std::log(x) - log_gamma_a);
    }
    // Lentz continued fraction for Q(a, x).
    double b = x + 1.0 - a;
    double c = 1.0 / 1e-300;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) {
            d = 1e-300;
        }
        c = b + an / c;
        if (std::abs(c) < 1e-300) {
            c = 1e-300;
        }
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) {
            break;
        }
    }
    const double q = std::exp(-x + a * std::log(x) - log_gamma_a) * h;
    return 1.0 - q;
}

double chi_squared_cdf(int dof, double x)
{
    return lower_incomplete_gamma_regularized(static_cast<double>(dof) / 2.0, x / 2.0);
}

// Quantile with upper-tail mass `tail`, via bisection on the CDF.
double chi_squared_quantile_oracle(int dof, double tail)
{
    double lo = 0.0;
    double hi = 200.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (1.0 - chi_squared_cdf(dof, mid) > tail) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace

TEST_CASE("histogram counts, out-of-support tracking and totals")
{
    Histogram h(1, 5);
    h.add(1);
    h.add(5);
    h.add(5);
    h.add(0);
    h.add(9);
    CHECK(h.count(1) == 1);
    CHECK(h.count(5) == 2);
    CHECK(h.underflow() == 1);
    CHECK(h.overflow() == 1);
    CHECK(h.total() == 5);
    CHECK(h.in_support_mean() == doctest::Approx((1.0 + 5.0 + 5.0) / 3.0));
}

TEST_CASE("merging histograms is a commutative, associative monoid operation")
{
    Rng rng(7);
    const auto random_histogram = [&]() {
        Histogram h(1, 6);
        const int n = static_cast<int>(rng.below(30));
        for (int i = 0; i < n; ++i) {
            h.add(static_cast<std::int64_t>(rng.uniform_int(-1, 8)));
        }
        return h;
    };
    for (int trial = 0; trial < 100; ++trial) {
        const Histogram a = random_histogram();
        const Histogram b = random_histogram();
        const Histogram c = random_histogram();
        CHECK(merge(a, b) == merge(b, a));
        CHECK(merge(merge(a, b), c) == merge(a, merge(b, c)));
        CHECK(merge(a, b).total() == a.total() + b.total());
        CHECK(merge(a, Histogram(1, 6)) == a); // empty histogram is the identity
    }
    CHECK_THROWS_AS(merge(Histogram(1, 6), Histogram(1, 7)), SimError);
}

TEST_CASE("chi-squared of a perfect fit is zero")
{
    Histogram h(1, 4);
    for (int v = 1; v <= 4; ++v) {
        h.add(v, 25);
    }
    const auto report = chi_squared(h, {0.25, 0.25, 0.25, 0.25});
    CHECK(report.statistic == doctest::Approx(0.0));
    CHECK(report.dof == 3);
    CHECK(report.pass_paper_convention);
    CHECK(report.pass_standard);
}

TEST_CASE("chi-squared hand case: observed 10/20 against even split")
{
    Histogram h(0, 1);
    h.add(0, 10);
    h.add(1, 20);
    const auto report = chi_squared(h, {0.5, 0.5});
    // N = 30 so expected = [15, 15]; statistic = 25/15 + 25/15 = 10/3.
    CHECK(std::abs(report.statistic - 10.0 / 3.0) < 1e-9);
    CHECK(report.dof == 1);
    CHECK(report.observations == 30);
}

TEST_CASE("chi-squared is bit-identical across repeated evaluation")
{
    Histogram h(1, 17);
    Rng rng(13);
    for (int i = 0; i < 5000; ++i) {
        h.add(static_cast<std::int64_t>(rng.uniform_int(1, 17)));
    }
    std::vector<double> probs(17, 1.0 / 17.0);
    const auto a = chi_squared(h, probs);
    const auto b = chi_squared(h, probs);
    CHECK(a.statistic == b.statistic);
    CHECK(a.dof == b.dof);
}

TEST_CASE("chi-squared input checking")
{
    Histogram h(1, 3);
    h.add(1);
    CHECK_THROWS_AS(chi_squared(h, {0.5, 0.5}), SimError);       // bin mismatch
    CHECK_THROWS_AS(chi_squared(h, {0.5, 0.3, 0.1}), SimError);  // probs do not sum to 1
    Histogram empty(1, 3);
    CHECK_THROWS_AS(chi_squared(empty, {0.4, 0.3, 0.3}), SimError);
}

TEST_CASE("zero-expectation bins pool into their neighbor")
{
    Histogram h(1, 4);
    h.add(1, 10);
    h.add(2, 10);
    h.add(4, 2);
    const auto report = chi_squared(h, {0.5, 0.5, 0.0, 0.0});
    // Bins 3 and 4 pool into bin 2: three bins become one, dof drops to 1.
    CHECK(report.dof == 1);
    CHECK(report.statistic == doctest::Approx((11.0 - 11.0) * 0.0 + 1.0 / 11.0 + 1.0 / 11.0));
}

TEST_CASE("frequency-scale chi-squared is invariant under count scaling")
{
    Histogram small(1, 5);
    Histogram big(1, 5);
    Rng rng(4);
    for (int v = 1; v <= 5; ++v) {
        const auto c = rng.below(40) + 1;
        small.add(v, c);
        big.add(v, c * 10);
    }
    const std::vector<double> probs(5, 0.2);
    const auto a = chi_squared_frequencies(small, probs);
    const auto b = chi_squared_frequencies(big, probs);
    CHECK(a.statistic == b.statistic);
    CHECK(a.scale == doctest::Approx(100.0));
    // The raw statistic scales with N instead.
    const auto raw_small = chi_squared(small, probs);
    const auto raw_big = chi_squared(big, probs);
    CHECK(raw_big.statistic == doctest::Approx(10.0 * raw_small.statistic));
}

TEST_CASE("tabulated critical values")
{
    CHECK(critical_value(16, 0.95) == 7.962);
    CHECK(critical_value(10, 0.95) == 3.940);
    CHECK(critical_value(16, 0.05) == 26.296);
    CHECK(critical_value(10, 0.05) == 18.307);
    CHECK_THROWS_AS(critical_value(0, 0.95), SimError);
    CHECK_THROWS_AS(critical_value(31, 0.95), SimError);
    CHECK_THROWS_AS(critical_value(5, 0.5), SimError);
}

TEST_CASE("critical values agree with a numeric quantile oracle to 3 decimals")
{
    for (int dof = 1; dof <= 30; ++dof) {
        CHECK(std::abs(critical_value(dof, 0.95) - chi_squared_quantile_oracle(dof, 0.95)) < 6e-4);
        CHECK(std::abs(critical_value(dof, 0.05) - chi_squared_quantile_oracle(dof, 0.05)) < 6e-4);
        CHECK(critical_value(dof, 0.95) < critical_value(dof, 0.05));
    }
}

TEST_CASE("histogram csv emits bin, observed, expected columns")
{
    Histogram h(1, 3);
    h.add(1, 2);
    h.add(2, 1);
    h.add(3, 1);
    std::ostringstream out;
    write_histogram_csv(out, h, {0.25, 0.5, 0.25});
    CHECK(out.str() == "bin,observed,expected\n1,2,1\n2,1,2\n3,1,1\n");
}
