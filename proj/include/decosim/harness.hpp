#pragma once

// One-run event loop and the multi-run experiment layer. A run is a
// deterministic function of its RunConfig (seed included); experiments fan
// independent runs out across threads and merge per-run histograms, so the
// report is independent of scheduling.

#include "decosim/config.hpp"
#include "decosim/core.hpp"
#include "decosim/evolution.hpp"
#include "decosim/fitness.hpp"
#include "decosim/network.hpp"
#include "decosim/rng.hpp"
#include "decosim/stats.hpp"
#include "decosim/users.hpp"
#include "decosim/version.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace decosim {

struct StepTrace {
    double best_fitness = 0.0;
    double optimum = 0.0; // max_fitness of the request

    bool solved() const { return best_fitness >= optimum; }
};

struct RunCounters {
    std::uint64_t requests_served = 0;
    std::uint64_t migrations = 0; // aggregation copies sent
    std::uint64_t agents_created = 0;
};

/// Per-checkpoint measurement of the deployed state across all habitats.
struct MeasurementSnapshot {
    std::int64_t step = 0;
    Histogram size_histogram;     // aggregation sizes of deployed applications
    Histogram attr_histogram;     // per-agent attribute counts within them
    std::uint64_t apps_measured = 0;
    double sum_sizes = 0.0;       // includes out-of-support sizes
    TopologyMetrics topology;
    double mean_p_intra = std::numeric_limits<double>::quiet_NaN();
    double mean_p_inter = std::numeric_limits<double>::quiet_NaN();
};

struct RunResult {
    std::uint64_t seed = 0;
    std::vector<MeasurementSnapshot> measurements;
    std::vector<StepTrace> trace;
    RunCounters counters;
};

/// Final world state, for callers that need more than the measurements
/// (topology export, invariant checks).
struct RunArtifacts {
    Network network;
    std::vector<User> users;
};

namespace detail {

inline PoolView make_pool_view(const Habitat& habitat)
{
    std::vector<const Agent*> agents;
    agents.reserve(habitat.pool.size());
    for (const auto& [id, entry] : habitat.pool) {
        agents.push_back(&entry.agent);
    }
    return PoolView(std::move(agents));
}

/// Mean connection probability within and across user communities.
inline void community_connection_means(const Network& network,
                                       const std::map<HabitatId, std::uint32_t>& community_of,
                                       double& mean_intra, double& mean_inter)
{
    double intra_sum = 0.0;
    double inter_sum = 0.0;
    std::uint64_t intra_count = 0;
    std::uint64_t inter_count = 0;
    for (const auto& [source_id, habitat] : network.habitats) {
        for (const auto& [dest_id, connection] : habitat.out) {
            if (community_of.at(source_id) == community_of.at(dest_id)) {
                intra_sum += connection.p;
                ++intra_count;
            } else {
                inter_sum += connection.p;
                ++inter_count;
            }
        }
    }
    mean_intra = intra_count > 0 ? intra_sum / static_cast<double>(intra_count)
                                 : std::numeric_limits<double>::quiet_NaN();
    mean_inter = inter_count > 0 ? inter_sum / static_cast<double>(inter_count)
                                 : std::numeric_limits<double>::quiet_NaN();
}

} // namespace detail

/// Runs the event loop: per step, a uniformly random user may register a new
/// service, issues a request, the habitat evolves and deploys the best
/// aggregation, its agents migrate, and the habitat's inbound connections
/// settle their pending migrants. Identical configs produce bit-identical
/// results. Module errors abort with step context.
inline RunResult run_simulation(const RunConfig& config, RunArtifacts* artifacts = nullptr)
{
    {
        const auto violations = validate_config(config);
        if (!violations.empty()) {
            std::string message = "invalid config";
            for (const auto& violation : violations) {
                message += "; " + violation;
            }
            throw ConfigError(message);
        }
    }

    Rng rng(config.seed);
    AgentIdSource ids;
    BuiltUsers built = build_users(config.users, config.a_max, ids, rng);
    Network network = build_network(config.users.n_users, config.network.p0);
    std::map<HabitatId, std::uint32_t> community_of;
    for (const User& user : built.users) {
        network.habitats.at(user.habitat_id).owner_user = user.id;
        community_of[user.habitat_id] = user.community_id;
    }
    for (auto& [habitat_id, catalog] : built.catalogs) {
        Habitat& habitat = network.habitats.at(habitat_id);
        for (Agent& agent : catalog) {
            insert_agent(habitat, std::move(agent), 0, config.network.pool_cap);
        }
    }

    const int size_lo = support_lo(config.users.length_dist);
    const int size_hi = support_hi(config.users.length_dist);
    const int attr_lo = support_lo(config.users.modularity_dist);
    const int attr_hi = support_hi(config.users.modularity_dist);

    RunResult result;
    result.seed = config.seed;
    result.trace.reserve(static_cast<std::size_t>(config.steps));

    // Cumulative accumulators for the collect_all_outputs measurement mode.
    Histogram all_sizes(size_lo, size_hi);
    Histogram all_attrs(attr_lo, attr_hi);
    std::uint64_t all_apps = 0;
    double all_size_sum = 0.0;

    std::vector<std::int64_t> checkpoints = config.measurement_steps();
    std::sort(checkpoints.begin(), checkpoints.end());
    checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
    std::size_t next_checkpoint = 0;

    for (std::int64_t t = 1; t <= config.steps; ++t) {
        try {
            const User& user = built.users[rng.below(built.users.size())];
            Habitat& habitat = network.habitats.at(user.habitat_id);

            if (auto agent = maybe_create_agent(user, config.users, t, ids, rng)) {
                insert_agent(habitat, std::move(*agent), t, config.network.pool_cap);
                ++result.counters.agents_created;
            }

            const Request request = generate_request(user, config.users, t, rng);
            const PoolView pool = detail::make_pool_view(habitat);
            std::vector<const Aggregation*> deployed;
            deployed.reserve(habitat.deployed.size());
            for (const DeployedApp& app : habitat.deployed) {
                deployed.push_back(&app.aggregation);
            }
            const auto seed =
                seed_population(pool, deployed, request, config.evolution, config.fitness, rng);
            const EvolutionResult evolved =
                evolve(request, seed, pool, config.evolution, config.fitness, rng);

            deploy(habitat, evolved.best, t, config.network.deployed_cap);
            result.counters.migrations +=
                migrate(network, habitat.id, evolved.best, t, ids, config.network, rng);
            ++habitat.requests_served;
            settle_pending(network, habitat.id, evolved.used_migrant_ids, config.network);

            ++result.counters.requests_served;
            result.trace.push_back(StepTrace{evolved.best_fitness, max_fitness(request)});

            if (config.measurement.collect_all_outputs) {
                const DeployedApp& app = habitat.deployed.back();
                all_sizes.add(static_cast<std::int64_t>(app.aggregation.size()));
                all_size_sum += static_cast<double>(app.aggregation.size());
                ++all_apps;
                for (std::uint16_t attrs : app.agent_attr_counts) {
                    all_attrs.add(attrs);
                }
            }
        } catch (const std::exception& e) {
            throw SimError("step " + std::to_string(t) + ": " + e.what());
        }

        if (next_checkpoint < checkpoints.size() && t == checkpoints[next_checkpoint]) {
            ++next_checkpoint;
            MeasurementSnapshot snapshot{
                t, Histogram(size_lo, size_hi), Histogram(attr_lo, attr_hi), 0, 0.0, {},
                std::numeric_limits<double>::quiet_NaN(),
                std::numeric_limits<double>::quiet_NaN()};
            if (config.measurement.collect_all_outputs) {
                snapshot.size_histogram = all_sizes;
                snapshot.attr_histogram = all_attrs;
                snapshot.apps_measured = all_apps;
                snapshot.sum_sizes = all_size_sum;
            } else {
                for (const auto& [habitat_id, habitat] : network.habitats) {
                    for (const DeployedApp& app : habitat.deployed) {
                        snapshot.size_histogram.add(static_cast<std::int64_t>(app.aggregation.size()));
                        snapshot.sum_sizes += static_cast<double>(app.aggregation.size());
                        ++snapshot.apps_measured;
                        for (std::uint16_t attrs : app.agent_attr_counts) {
                            snapshot.attr_histogram.add(attrs);
                        }
                    }
                }
            }
            snapshot.topology = topology_metrics(network, config.network.topology_threshold);
            detail::community_connection_means(network, community_of, snapshot.mean_p_intra,
                                               snapshot.mean_p_inter);
            result.measurements.push_back(std::move(snapshot));
        }
    }

    if (artifacts != nullptr) {
        artifacts->network = std::move(network);
        artifacts->users = std::move(built.users);
    }
    return result;
}

// --- experiment layer ------------------------------------------------------

struct RunFailure {
    std::uint64_t seed = 0;
    std::string message;
};

/// Cross-run aggregate for one measurement step.
struct MergedMeasurement {
    std::int64_t step = 0;
    Histogram size_histogram;
    Histogram attr_histogram;
    std::optional<ChiSquaredReport> size_chi;      // frequency scale (percentages)
    std::optional<ChiSquaredReport> size_chi_raw;  // raw merged counts
    std::optional<ChiSquaredReport> attr_chi;
    std::optional<ChiSquaredReport> attr_chi_raw;
    std::uint64_t apps_measured = 0;
    double mean_aggregation_size = std::numeric_limits<double>::quiet_NaN();
    double mean_clustering = std::numeric_limits<double>::quiet_NaN();
    double mean_random_clustering_baseline = std::numeric_limits<double>::quiet_NaN();
    double mean_path_length = std::numeric_limits<double>::quiet_NaN();
    double mean_edge_count = std::numeric_limits<double>::quiet_NaN();
    double mean_p_intra = std::numeric_limits<double>::quiet_NaN();
    double mean_p_inter = std::numeric_limits<double>::quiet_NaN();
};

struct SolveRateWindow {
    std::uint64_t solved = 0;
    std::uint64_t total = 0;

    double rate() const
    {
        return total > 0 ? static_cast<double>(solved) / static_cast<double>(total)
                         : std::numeric_limits<double>::quiet_NaN();
    }
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<MergedMeasurement> measurements;
    RunCounters totals;
    std::vector<SolveRateWindow> solve_windows; // 10 equal step windows
    std::vector<RunFailure> failures;
    std::string first_run_topology_csv; // final network of the first run
    double expected_mean_length = 0.0;
    double expected_mean_modularity = 0.0;
};

namespace detail {

inline double mean_of_finite(const std::vector<double>& values)
{
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : values) {
        if (std::isfinite(v)) {
            sum += v;
            ++n;
        }
    }
    return n > 0 ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

} // namespace detail

/// Runs n_runs independent simulations with seeds seed, seed+1, ... and
/// merges their measurements. Failed runs are recorded and skipped in the
/// aggregation. The report is a pure function of the config.
inline ExperimentReport run_experiment(const ExperimentConfig& config, unsigned parallelism = 1)
{
    {
        const auto violations = validate_config(config.run);
        if (!violations.empty()) {
            std::string message = "invalid config";
            for (const auto& violation : violations) {
                message += "; " + violation;
            }
            throw ConfigError(message);
        }
        if (config.n_runs < 1) {
            throw ConfigError("n_runs: must be >= 1");
        }
    }

    const std::size_t n_runs = config.n_runs;
    std::vector<std::optional<RunResult>> results(n_runs);
    std::vector<std::optional<RunFailure>> failures(n_runs);
    RunArtifacts first_artifacts;

    const auto execute = [&](std::size_t index) {
        RunConfig run_config = config.run;
        run_config.seed = config.run.seed + index;
        try {
            results[index] =
                run_simulation(run_config, index == 0 ? &first_artifacts : nullptr);
        } catch (const std::exception& e) {
            failures[index] = RunFailure{run_config.seed, e.what()};
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(parallelism, static_cast<unsigned>(n_runs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n_runs; ++i) {
            execute(i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            threads.emplace_back([&]() {
                for (;;) {
                    const std::size_t index = next.fetch_add(1);
                    if (index >= n_runs) {
                        return;
                    }
                    execute(index);
                }
            });
        }
        for (auto& thread : threads) {
            thread.join();
        }
    }

    ExperimentReport report;
    report.config = config;
    report.expected_mean_length = mean(config.run.users.length_dist);
    report.expected_mean_modularity = mean(config.run.users.modularity_dist);
    {
        std::ostringstream csv;
        write_topology_csv(csv, first_artifacts.network);
        report.first_run_topology_csv = csv.str();
    }

    const std::size_t n_windows = 10;
    report.solve_windows.assign(n_windows, SolveRateWindow{});
    const auto window_of = [&](std::size_t step_index, std::size_t n_steps) {
        return std::min(n_windows - 1, step_index * n_windows / n_steps);
    };

    const auto expected_size_probs = pmf(config.run.users.length_dist);
    const auto expected_attr_probs = pmf(config.run.users.modularity_dist);

    // Merge in run-index order: scheduling cannot affect the outcome.
    bool merged_any = false;
    std::vector<std::vector<double>> clustering_by_checkpoint;
    std::vector<std::vector<double>> baseline_by_checkpoint;
    std::vector<std::vector<double>> path_by_checkpoint;
    std::vector<std::vector<double>> edges_by_checkpoint;
    std::vector<std::vector<double>> p_intra_by_checkpoint;
    std::vector<std::vector<double>> p_inter_by_checkpoint;
    std::vector<double> size_sum_by_checkpoint;

    for (std::size_t i = 0; i < n_runs; ++i) {
        if (failures[i]) {
            report.failures.push_back(*failures[i]);
            continue;
        }
        const RunResult& run = *results[i];
        report.totals.requests_served += run.counters.requests_served;
        report.totals.migrations += run.counters.migrations;
        report.totals.agents_created += run.counters.agents_created;
        for (std::size_t s = 0; s < run.trace.size(); ++s) {
            auto& window = report.solve_windows[window_of(s, run.trace.size())];
            ++window.total;
            if (run.trace[s].solved()) {
                ++window.solved;
            }
        }
        if (!merged_any) {
            merged_any = true;
            const std::size_t n_checkpoints = run.measurements.size();
            clustering_by_checkpoint.resize(n_checkpoints);
            baseline_by_checkpoint.resize(n_checkpoints);
            path_by_checkpoint.resize(n_checkpoints);
            edges_by_checkpoint.resize(n_checkpoints);
            p_intra_by_checkpoint.resize(n_checkpoints);
            p_inter_by_checkpoint.resize(n_checkpoints);
            size_sum_by_checkpoint.assign(n_checkpoints, 0.0);
            for (const MeasurementSnapshot& snapshot : run.measurements) {
                MergedMeasurement merged{snapshot.step, snapshot.size_histogram,
                                         snapshot.attr_histogram};
                merged.apps_measured = snapshot.apps_measured;
                report.measurements.push_back(std::move(merged));
            }
        } else {
            for (std::size_t m = 0; m < run.measurements.size(); ++m) {
                MergedMeasurement& merged = report.measurements[m];
                merged.size_histogram =
                    merge(merged.size_histogram, run.measurements[m].size_histogram);
                merged.attr_histogram =
                    merge(merged.attr_histogram, run.measurements[m].attr_histogram);
                merged.apps_measured += run.measurements[m].apps_measured;
            }
        }
        for (std::size_t m = 0; m < run.measurements.size(); ++m) {
            const MeasurementSnapshot& snapshot = run.measurements[m];
            clustering_by_checkpoint[m].push_back(snapshot.topology.clustering_coefficient);
            baseline_by_checkpoint[m].push_back(snapshot.topology.random_clustering_baseline);
            path_by_checkpoint[m].push_back(snapshot.topology.characteristic_path_length);
            edges_by_checkpoint[m].push_back(static_cast<double>(snapshot.topology.edge_count));
            p_intra_by_checkpoint[m].push_back(snapshot.mean_p_intra);
            p_inter_by_checkpoint[m].push_back(snapshot.mean_p_inter);
            size_sum_by_checkpoint[m] += snapshot.sum_sizes;
        }
    }

    for (std::size_t m = 0; m < report.measurements.size(); ++m) {
        MergedMeasurement& merged = report.measurements[m];
        if (merged.size_histogram.total() > 0) {
            merged.size_chi = chi_squared_frequencies(merged.size_histogram, expected_size_probs);
            merged.size_chi_raw = chi_squared(merged.size_histogram, expected_size_probs);
        }
        if (merged.attr_histogram.total() > 0) {
            merged.attr_chi = chi_squared_frequencies(merged.attr_histogram, expected_attr_probs);
            merged.attr_chi_raw = chi_squared(merged.attr_histogram, expected_attr_probs);
        }
        if (merged.apps_measured > 0) {
            merged.mean_aggregation_size =
                size_sum_by_checkpoint[m] / static_cast<double>(merged.apps_measured);
        }
        merged.mean_clustering = detail::mean_of_finite(clustering_by_checkpoint[m]);
        merged.mean_random_clustering_baseline = detail::mean_of_finite(baseline_by_checkpoint[m]);
        merged.mean_path_length = detail::mean_of_finite(path_by_checkpoint[m]);
        merged.mean_edge_count = detail::mean_of_finite(edges_by_checkpoint[m]);
        merged.mean_p_intra = detail::mean_of_finite(p_intra_by_checkpoint[m]);
        merged.mean_p_inter = detail::mean_of_finite(p_inter_by_checkpoint[m]);
    }
    return report;
}

// --- serialization ---------------------------------------------------------

inline nlohmann::json to_json(const Histogram& h)
{
    return {{"lo", h.lo()},
            {"hi", h.hi()},
            {"counts", h.counts()},
            {"underflow", h.underflow()},
            {"overflow", h.overflow()},
            {"total", h.total()}};
}

inline nlohmann::json to_json(const ChiSquaredReport& r)
{
    return {{"statistic", r.statistic},
            {"dof", r.dof},
            {"critical_lower_0_95", r.critical_lower_0_95},
            {"critical_upper_0_05", r.critical_upper_0_05},
            {"pass_paper_convention", r.pass_paper_convention},
            {"pass_standard", r.pass_standard},
            {"scale", r.scale},
            {"observations", r.observations}};
}

inline nlohmann::json to_json(const TopologyMetrics& t)
{
    return {{"clustering_coefficient", t.clustering_coefficient},
            {"characteristic_path_length", t.characteristic_path_length},
            {"edge_count", t.edge_count},
            {"random_clustering_baseline", t.random_clustering_baseline},
            {"largest_component", t.largest_component}};
}

inline nlohmann::json to_json(const RunResult& result, const RunConfig& config)
{
    nlohmann::json measurements = nlohmann::json::array();
    for (const MeasurementSnapshot& m : result.measurements) {
        measurements.push_back({{"step", m.step},
                                {"size_histogram", to_json(m.size_histogram)},
                                {"attr_histogram", to_json(m.attr_histogram)},
                                {"apps_measured", m.apps_measured},
                                {"mean_aggregation_size",
                                 m.apps_measured > 0
                                     ? m.sum_sizes / static_cast<double>(m.apps_measured)
                                     : std::numeric_limits<double>::quiet_NaN()},
                                {"topology", to_json(m.topology)},
                                {"mean_p_intra", m.mean_p_intra},
                                {"mean_p_inter", m.mean_p_inter}});
    }
    nlohmann::json trace = nlohmann::json::array();
    for (const StepTrace& t : result.trace) {
        trace.push_back({{"best_fitness", t.best_fitness}, {"optimum", t.optimum}});
    }
    return {{"tool", {{"name", kToolName}, {"version", kToolVersion}}},
            {"config", to_json(config)},
            {"seed", result.seed},
            {"counters",
             {{"requests_served", result.counters.requests_served},
              {"migrations", result.counters.migrations},
              {"agents_created", result.counters.agents_created}}},
            {"measurements", measurements},
            {"trace", trace}};
}

inline nlohmann::json to_json(const ExperimentReport& report)
{
    nlohmann::json measurements = nlohmann::json::array();
    for (const MergedMeasurement& m : report.measurements) {
        nlohmann::json entry = {{"step", m.step},
                                {"size_histogram", to_json(m.size_histogram)},
                                {"attr_histogram", to_json(m.attr_histogram)},
                                {"apps_measured", m.apps_measured},
                                {"mean_aggregation_size", m.mean_aggregation_size},
                                {"mean_clustering", m.mean_clustering},
                                {"mean_random_clustering_baseline",
                                 m.mean_random_clustering_baseline},
                                {"mean_path_length", m.mean_path_length},
                                {"mean_edge_count", m.mean_edge_count},
                                {"mean_p_intra", m.mean_p_intra},
                                {"mean_p_inter", m.mean_p_inter}};
        entry["size_chi_squared"] = m.size_chi ? to_json(*m.size_chi) : nlohmann::json();
        entry["size_chi_squared_raw"] = m.size_chi_raw ? to_json(*m.size_chi_raw) : nlohmann::json();
        entry["attr_chi_squared"] = m.attr_chi ? to_json(*m.attr_chi) : nlohmann::json();
        entry["attr_chi_squared_raw"] = m.attr_chi_raw ? to_json(*m.attr_chi_raw) : nlohmann::json();
        measurements.push_back(std::move(entry));
    }
    nlohmann::json windows = nlohmann::json::array();
    for (const SolveRateWindow& w : report.solve_windows) {
        windows.push_back({{"solved", w.solved}, {"total", w.total}, {"rate", w.rate()}});
    }
    nlohmann::json failures = nlohmann::json::array();
    for (const RunFailure& f : report.failures) {
        failures.push_back({{"seed", f.seed}, {"error", f.message}});
    }
    return {{"tool", {{"name", kToolName}, {"version", kToolVersion}}},
            {"config", to_json(report.config)},
            {"expected_mean_length", report.expected_mean_length},
            {"expected_mean_modularity", report.expected_mean_modularity},
            {"totals",
             {{"requests_served", report.totals.requests_served},
              {"migrations", report.totals.migrations},
              {"agents_created", report.totals.agents_created}}},
            {"measurements", measurements},
            {"solve_rate_windows", windows},
            {"failures", failures}};
}

} // namespace decosim
