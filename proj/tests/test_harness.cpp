#include "decosim/config.hpp"
#include "decosim/harness.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

using namespace decosim;

namespace {

// Small world that still exercises every mechanism.
RunConfig tiny_config()
{
    RunConfig config;
    config.steps = 60;
    config.users.n_users = 6;
    config.users.n_communities = 2;
    config.users.vocab_size = 12;
    config.users.catalog_size = 10;
    config.users.length_dist = UniformSpec{1, 4};
    config.users.modularity_dist = UniformSpec{1, 3};
    config.evolution.pop_size = 16;
    config.evolution.max_generations = 25;
    config.evolution.stagnation_window = 8;
    return config;
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys)
{
    const auto ranks = [](const std::vector<double>& values) {
        std::vector<std::size_t> order(values.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        std::vector<double> rank(values.size(), 0.0);
        std::size_t i = 0;
        while (i < order.size()) {
            std::size_t j = i;
            while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) {
                ++j;
            }
            const double average = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
            for (std::size_t k = i; k <= j; ++k) {
                rank[order[k]] = average;
            }
            i = j + 1;
        }
        return rank;
    };
    const auto rx = ranks(xs);
    const auto ry = ranks(ys);
    const double n = static_cast<double>(xs.size());
    const double mean_x = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double mean_y = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double cov = 0.0;
    double var_x = 0.0;
    double var_y = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        cov += (rx[k] - mean_x) * (ry[k] - mean_y);
        var_x += (rx[k] - mean_x) * (rx[k] - mean_x);
        var_y += (ry[k] - mean_y) * (ry[k] - mean_y);
    }
    return cov / std::sqrt(var_x * var_y);
}

} // namespace

TEST_CASE("a single-step, single-user run serves exactly one request")
{
    RunConfig config = tiny_config();
    config.steps = 1;
    config.users.n_users = 1;
    config.users.n_communities = 1;
    RunArtifacts artifacts;
    const RunResult result = run_simulation(config, &artifacts);
    CHECK(result.counters.requests_served == 1);
    CHECK(result.trace.size() == 1);
    CHECK(artifacts.network.habitats.at(0).deployed.size() == 1);
    REQUIRE(result.measurements.size() == 1);
    CHECK(result.measurements[0].apps_measured == 1);
    CHECK(result.measurements[0].size_histogram.total() == 1);
}

TEST_CASE("identical configs produce bit-identical serialized results")
{
    const RunConfig config = tiny_config();
    const RunResult a = run_simulation(config);
    const RunResult b = run_simulation(config);
    CHECK(to_json(a, config).dump() == to_json(b, config).dump());
}

TEST_CASE("every step serves one request, so requests per user average steps over users")
{
    RunConfig config = tiny_config();
    config.steps = 120;
    RunArtifacts artifacts;
    const RunResult result = run_simulation(config, &artifacts);
    CHECK(result.counters.requests_served == 120);
    std::uint64_t served = 0;
    for (const auto& [id, habitat] : artifacts.network.habitats) {
        served += habitat.requests_served;
    }
    CHECK(served == 120);
    const double mean_requests =
        static_cast<double>(served) / static_cast<double>(config.users.n_users);
    CHECK(std::abs(mean_requests - 120.0 / 6.0) < 1e-12);
}

TEST_CASE("pool agents only ever come from catalogs, user creation, or migration")
{
    RunConfig config = tiny_config();
    config.steps = 150;
    RunArtifacts artifacts;
    const RunResult result = run_simulation(config, &artifacts);
    std::uint64_t migrants = 0;
    for (const auto& [habitat_id, habitat] : artifacts.network.habitats) {
        for (const auto& [agent_id, entry] : habitat.pool) {
            switch (entry.agent.provenance) {
            case AgentProvenance::catalog:
                CHECK(entry.agent.origin_habitat == habitat_id);
                CHECK(entry.agent.created_step == 0);
                break;
            case AgentProvenance::user_created:
                CHECK(entry.agent.origin_habitat == habitat_id);
                CHECK(entry.agent.created_step >= 1);
                break;
            case AgentProvenance::migrant:
                CHECK(entry.agent.origin_habitat != habitat_id);
                ++migrants;
                break;
            }
        }
    }
    CHECK(result.counters.migrations > 0);
    CHECK(migrants > 0);
}

TEST_CASE("measurement histogram totals are consistent with the app counts")
{
    RunConfig config = tiny_config();
    config.measurement.steps = {20, 60};
    const RunResult result = run_simulation(config);
    REQUIRE(result.measurements.size() == 2);
    for (const auto& measurement : result.measurements) {
        CHECK(measurement.size_histogram.total() == measurement.apps_measured);
        // Every measured application contributes at least one agent.
        CHECK(measurement.attr_histogram.total() >= measurement.apps_measured);
    }
}

TEST_CASE("collect_all_outputs measures every best-of-run application")
{
    RunConfig config = tiny_config();
    config.measurement.collect_all_outputs = true;
    const RunResult result = run_simulation(config);
    REQUIRE(result.measurements.size() == 1);
    CHECK(result.measurements[0].apps_measured == result.counters.requests_served);
}

TEST_CASE("an experiment of one run reproduces that run's histograms")
{
    ExperimentConfig config;
    config.run = tiny_config();
    config.n_runs = 1;
    const ExperimentReport report = run_experiment(config);
    const RunResult single = run_simulation(config.run);
    REQUIRE(report.measurements.size() == single.measurements.size());
    CHECK(report.measurements[0].size_histogram == single.measurements[0].size_histogram);
    CHECK(report.measurements[0].attr_histogram == single.measurements[0].attr_histogram);
    CHECK(report.failures.empty());
}

TEST_CASE("merged experiment totals are the sum of the individual runs")
{
    ExperimentConfig config;
    config.run = tiny_config();
    config.n_runs = 2;
    const ExperimentReport report = run_experiment(config);

    RunConfig first = config.run;
    RunConfig second = config.run;
    second.seed = config.run.seed + 1;
    const RunResult a = run_simulation(first);
    const RunResult b = run_simulation(second);
    CHECK(report.totals.requests_served
          == a.counters.requests_served + b.counters.requests_served);
    CHECK(report.measurements[0].size_histogram.total()
          == a.measurements[0].size_histogram.total() + b.measurements[0].size_histogram.total());
    CHECK(report.measurements[0].apps_measured
          == a.measurements[0].apps_measured + b.measurements[0].apps_measured);
}

TEST_CASE("experiment reports are identical across serial and parallel execution")
{
    ExperimentConfig config;
    config.run = tiny_config();
    config.n_runs = 6;
    const ExperimentReport serial = run_experiment(config, 1);
    const ExperimentReport parallel = run_experiment(config, 4);
    CHECK(to_json(serial).dump() == to_json(parallel).dump());
}

TEST_CASE("chi-squared reports carry the support-derived degrees of freedom")
{
    ExperimentConfig config;
    config.run = tiny_config();
    config.run.users.length_dist = UniformSpec{1, 17};
    config.run.users.modularity_dist = UniformSpec{1, 11};
    config.run.users.vocab_size = 20;
    config.n_runs = 2;
    const ExperimentReport report = run_experiment(config);
    REQUIRE(!report.measurements.empty());
    REQUIRE(report.measurements.back().size_chi.has_value());
    REQUIRE(report.measurements.back().attr_chi.has_value());
    CHECK(report.measurements.back().size_chi->dof == 16);
    CHECK(report.measurements.back().attr_chi->dof == 10);
    CHECK(report.measurements.back().size_chi_raw->dof == 16);
}

TEST_CASE("failing runs are reported with their seeds and the step context")
{
    ExperimentConfig config;
    config.run = tiny_config();
    config.run.users.catalog_size = 0;
    config.run.users.p_new_service = 0.0; // habitats can never acquire agents
    config.n_runs = 3;
    const ExperimentReport report = run_experiment(config);
    REQUIRE(report.failures.size() == 3);
    CHECK(report.failures[0].seed == config.run.seed);
    CHECK(report.failures[1].seed == config.run.seed + 1);
    CHECK(report.failures[0].message.find("step 1") != std::string::npos);
    CHECK(report.failures[0].message.find("habitat has no agents") != std::string::npos);
    CHECK(report.totals.requests_served == 0);
}

TEST_CASE("an invalid config is rejected before any run starts")
{
    ExperimentConfig config;
    config.run = tiny_config();
    config.run.users.length_dist = UniformSpec{5, 2};
    CHECK_THROWS_AS(run_experiment(config), ConfigError);
}

TEST_CASE("the optimal-solve rate trends upward over the course of a run")
{
    ExperimentConfig config;
    config.run = tiny_config();
    config.run.steps = 400;
    config.run.users.n_users = 8;
    config.n_runs = 12;
    const ExperimentReport report = run_experiment(config, 2);
    REQUIRE(report.solve_windows.size() == 10);
    std::vector<double> window_index;
    std::vector<double> rates;
    for (std::size_t w = 0; w < report.solve_windows.size(); ++w) {
        window_index.push_back(static_cast<double>(w));
        rates.push_back(report.solve_windows[w].rate());
        CHECK(report.solve_windows[w].total > 0);
    }
    CHECK(spearman(window_index, rates) > 0.0);
}
