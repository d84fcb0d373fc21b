#pragma once

// Run/experiment configuration: defaults, invariant validation, JSON
// (de)serialization and dotted-path overrides. The JSON schema mirrors the
// struct layout; unknown keys and malformed values are reported with the
// offending key name.

#include "decosim/core.hpp"
#include "decosim/evolution.hpp"
#include "decosim/fitness.hpp"
#include "decosim/network.hpp"
#include "decosim/users.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace decosim {

struct MeasurementConfig {
    /// Steps at which deployed applications and topology are measured.
    /// Empty means "the final step".
    std::vector<std::int64_t> steps;
    /// When true, histograms cover every best-of-run application produced so
    /// far instead of the applications deployed at the measurement step.
    bool collect_all_outputs = false;
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::int64_t steps = 1000;
    std::size_t a_max = 200;    // attribute vocabulary size
    std::size_t attr_cap = 11;  // max attributes per atomic service
    UserModelConfig users;
    EvolutionParams evolution;
    FitnessParams fitness;
    NetworkParams network;
    MeasurementConfig measurement;

    std::vector<std::int64_t> measurement_steps() const
    {
        return measurement.steps.empty() ? std::vector<std::int64_t>{steps} : measurement.steps;
    }
};

struct ExperimentConfig {
    RunConfig run;
    std::size_t n_runs = 200;
};

/// Empty iff every type invariant and module precondition is satisfiable.
/// Violations name the offending key; nothing is thrown.
inline std::vector<std::string> validate_config(const RunConfig& config)
{
    std::vector<std::string> v;
    if (config.steps < 1) {
        v.push_back("steps: must be >= 1");
    }
    if (config.a_max == 0) {
        v.push_back("a_max: attribute vocabulary empty");
    }
    if (config.attr_cap == 0) {
        v.push_back("attr_cap: must be >= 1");
    }
    if (config.attr_cap > config.a_max) {
        v.push_back("attr_cap: exceeds a_max");
    }

    const auto check_dist = [&](const DistributionSpec& d, const std::string& key) {
        const auto dist_violations = validate(d, key);
        v.insert(v.end(), dist_violations.begin(), dist_violations.end());
    };
    check_dist(config.users.length_dist, "users.length_dist");
    check_dist(config.users.modularity_dist, "users.modularity_dist");
    if (support_hi(config.users.modularity_dist) > static_cast<int>(config.attr_cap)) {
        v.push_back("users.modularity_dist: hi exceeds attr_cap");
    }
    if (config.users.n_communities == 0) {
        v.push_back("users.n_communities: must be >= 1");
    } else {
        if (config.users.n_users < config.users.n_communities) {
            v.push_back("users.n_users: fewer users than communities");
        }
        if (config.users.vocab_size > config.a_max / config.users.n_communities) {
            v.push_back("users.vocab_size: infeasible vocabulary constraints "
                        "(exceeds per-community share of a_max)");
        }
    }
    if (config.users.vocab_size
        < static_cast<std::size_t>(std::max(0, support_hi(config.users.modularity_dist)))) {
        v.push_back("users.vocab_size: smaller than the largest modularity draw");
    }
    if (config.users.overlap_frac < 0.0 || config.users.overlap_frac > 1.0) {
        v.push_back("users.overlap_frac: must be in [0, 1]");
    }
    if (config.users.p_new_service < 0.0 || config.users.p_new_service > 1.0) {
        v.push_back("users.p_new_service: must be in [0, 1]");
    }

    const auto& e = config.evolution;
    if (e.pop_size < 2) {
        v.push_back("evolution.pop_size: must be >= 2");
    }
    if (e.tournament_k < 1 || e.tournament_k > e.pop_size) {
        v.push_back("evolution.tournament_k: must be in [1, pop_size]");
    }
    const auto check_probability = [&](double p, const std::string& key) {
        if (!(p >= 0.0 && p <= 1.0)) {
            v.push_back(key + ": must be in [0, 1]");
        }
    };
    check_probability(e.p_crossover, "evolution.p_crossover");
    check_probability(e.p_mutate_replace, "evolution.p_mutate_replace");
    check_probability(e.p_mutate_insert, "evolution.p_mutate_insert");
    check_probability(e.p_mutate_delete, "evolution.p_mutate_delete");
    if (e.max_generations < 1) {
        v.push_back("evolution.max_generations: must be >= 1");
    }
    if (e.stagnation_window < 1) {
        v.push_back("evolution.stagnation_window: must be >= 1");
    }
    if (e.elitism < 0 || e.elitism >= e.pop_size) {
        v.push_back("evolution.elitism: must be in [0, pop_size)");
    }

    if (!(std::isfinite(config.fitness.alpha) && config.fitness.alpha >= 0.0)) {
        v.push_back("fitness.alpha: must be finite and >= 0");
    }
    if (!(std::isfinite(config.fitness.beta) && config.fitness.beta >= 0.0)) {
        v.push_back("fitness.beta: must be finite and >= 0");
    }
    if (!(config.fitness.floor <= -1e3)) {
        v.push_back("fitness.floor: must sit below any achievable score (<= -1e3)");
    }

    const auto& n = config.network;
    if (!(n.p_min >= 0.0 && n.p_min <= n.p_max && n.p_max <= 1.0)) {
        v.push_back("network.p_min/p_max: need 0 <= p_min <= p_max <= 1");
    }
    if (!(n.p0 >= n.p_min && n.p0 <= n.p_max)) {
        v.push_back("network.p0: must be in [p_min, p_max]");
    }
    if (!(n.eta > 0.0 && n.eta < 1.0)) {
        v.push_back("network.eta: must be in (0, 1)");
    }
    if (n.pending_window < 1) {
        v.push_back("network.pending_window: must be >= 1");
    }
    if (n.deployed_cap < 1) {
        v.push_back("network.deployed_cap: must be >= 1");
    }
    if (n.pool_cap < 1) {
        v.push_back("network.pool_cap: must be >= 1");
    }
    if (!(n.topology_threshold >= 0.0 && n.topology_threshold <= 1.0)) {
        v.push_back("network.topology_threshold: must be in [0, 1]");
    }

    for (std::int64_t step : config.measurement.steps) {
        if (step < 1 || step > config.steps) {
            v.push_back("measurement.steps: step " + std::to_string(step)
                        + " outside [1, steps]");
        }
    }
    return v;
}

// --- JSON ----------------------------------------------------------------

inline nlohmann::json to_json(const DistributionSpec& d)
{
    if (const auto* u = std::get_if<UniformSpec>(&d)) {
        return {{"type", "uniform"}, {"lo", u->lo}, {"hi", u->hi}};
    }
    if (const auto* g = std::get_if<GaussianSpec>(&d)) {
        return {{"type", "gaussian"}, {"mu", g->mu}, {"sigma", g->sigma}, {"lo", g->lo}, {"hi", g->hi}};
    }
    const auto& p = std::get<PowerLawSpec>(d);
    return {{"type", "power_law"}, {"gamma", p.gamma}, {"lo", p.lo}, {"hi", p.hi}};
}

inline nlohmann::json to_json(const RunConfig& c)
{
    return {
        {"seed", c.seed},
        {"steps", c.steps},
        {"a_max", c.a_max},
        {"attr_cap", c.attr_cap},
        {"users",
         {{"n_users", c.users.n_users},
          {"n_communities", c.users.n_communities},
          {"vocab_size", c.users.vocab_size},
          {"overlap_frac", c.users.overlap_frac},
          {"catalog_size", c.users.catalog_size},
          {"p_new_service", c.users.p_new_service},
          {"length_dist", to_json(c.users.length_dist)},
          {"modularity_dist", to_json(c.users.modularity_dist)}}},
        {"evolution",
         {{"pop_size", c.evolution.pop_size},
          {"tournament_k", c.evolution.tournament_k},
          {"p_crossover", c.evolution.p_crossover},
          {"p_mutate_replace", c.evolution.p_mutate_replace},
          {"p_mutate_insert", c.evolution.p_mutate_insert},
          {"p_mutate_delete", c.evolution.p_mutate_delete},
          {"max_generations", c.evolution.max_generations},
          {"stagnation_window", c.evolution.stagnation_window},
          {"elitism", c.evolution.elitism}}},
        {"fitness",
         {{"alpha", c.fitness.alpha}, {"beta", c.fitness.beta}, {"floor", c.fitness.floor}}},
        {"network",
         {{"p0", c.network.p0},
          {"p_min", c.network.p_min},
          {"p_max", c.network.p_max},
          {"eta", c.network.eta},
          {"pending_window", c.network.pending_window},
          {"deployed_cap", c.network.deployed_cap},
          {"pool_cap", c.network.pool_cap},
          {"topology_threshold", c.network.topology_threshold}}},
        {"measurement",
         {{"steps", c.measurement.steps}, {"collect_all_outputs", c.measurement.collect_all_outputs}}},
    };
}

inline nlohmann::json to_json(const ExperimentConfig& c)
{
    return {{"run", to_json(c.run)}, {"n_runs", c.n_runs}};
}

/// Error carrying the offending config key.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& message) : std::runtime_error(message) {}
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& value, const nlohmann::json& schema,
                                const std::string& prefix)
{
    if (!value.is_object()) {
        return;
    }
    for (const auto& [key, child] : value.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (!schema.is_object() || !schema.contains(key)) {
            throw ConfigError(path + ": unknown config key");
        }
        // Distribution objects change shape with their "type" and are
        // validated by distribution_from_json.
        if (schema[key].is_object() && schema[key].contains("type")) {
            continue;
        }
        reject_unknown_keys(child, schema[key], path);
    }
}

template <typename T>
T field(const nlohmann::json& j, const std::string& key, const T& fallback,
        const std::string& prefix)
{
    if (!j.contains(key)) {
        return fallback;
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError((prefix.empty() ? key : prefix + "." + key) + ": malformed value");
    }
}

} // namespace detail

inline DistributionSpec distribution_from_json(const nlohmann::json& j, const std::string& key,
                                               const DistributionSpec& fallback)
{
    if (j.is_null()) {
        return fallback;
    }
    if (!j.is_object() || !j.contains("type")) {
        throw ConfigError(key + ": distribution needs a \"type\" field");
    }
    const std::string type = j.at("type").get<std::string>();
    const auto allow_keys = [&](std::initializer_list<const char*> allowed) {
        for (const auto& [field_key, child] : j.items()) {
            (void)child;
            if (std::find_if(allowed.begin(), allowed.end(),
                             [&](const char* a) { return field_key == a; })
                == allowed.end()) {
                throw ConfigError(key + "." + field_key + ": unknown config key");
            }
        }
    };
    if (type == "uniform") {
        allow_keys({"type", "lo", "hi"});
        return UniformSpec{detail::field(j, "lo", 1, key), detail::field(j, "hi", 1, key)};
    }
    if (type == "gaussian") {
        allow_keys({"type", "mu", "sigma", "lo", "hi"});
        return GaussianSpec{detail::field(j, "mu", 0.0, key), detail::field(j, "sigma", 1.0, key),
                            detail::field(j, "lo", 1, key), detail::field(j, "hi", 1, key)};
    }
    if (type == "power_law") {
        allow_keys({"type", "gamma", "lo", "hi"});
        return PowerLawSpec{detail::field(j, "gamma", 1.0, key), detail::field(j, "lo", 1, key),
                            detail::field(j, "hi", 1, key)};
    }
    throw ConfigError(key + ": unknown distribution type \"" + type + "\"");
}

/// Parses a RunConfig over the defaults; missing fields keep their default
/// values, unknown keys raise ConfigError.
inline RunConfig run_config_from_json(const nlohmann::json& j)
{
    RunConfig c;
    detail::reject_unknown_keys(j, to_json(c), "");
    c.seed = detail::field(j, "seed", c.seed, "");
    c.steps = detail::field(j, "steps", c.steps, "");
    c.a_max = detail::field(j, "a_max", c.a_max, "");
    c.attr_cap = detail::field(j, "attr_cap", c.attr_cap, "");
    if (j.contains("users")) {
        const auto& u = j.at("users");
        c.users.n_users = detail::field(u, "n_users", c.users.n_users, "users");
        c.users.n_communities = detail::field(u, "n_communities", c.users.n_communities, "users");
        c.users.vocab_size = detail::field(u, "vocab_size", c.users.vocab_size, "users");
        c.users.overlap_frac = detail::field(u, "overlap_frac", c.users.overlap_frac, "users");
        c.users.catalog_size = detail::field(u, "catalog_size", c.users.catalog_size, "users");
        c.users.p_new_service = detail::field(u, "p_new_service", c.users.p_new_service, "users");
        if (u.contains("length_dist")) {
            c.users.length_dist =
                distribution_from_json(u.at("length_dist"), "users.length_dist", c.users.length_dist);
        }
        if (u.contains("modularity_dist")) {
            c.users.modularity_dist = distribution_from_json(u.at("modularity_dist"),
                                                             "users.modularity_dist",
                                                             c.users.modularity_dist);
        }
    }
    if (j.contains("evolution")) {
        const auto& e = j.at("evolution");
        c.evolution.pop_size = detail::field(e, "pop_size", c.evolution.pop_size, "evolution");
        c.evolution.tournament_k =
            detail::field(e, "tournament_k", c.evolution.tournament_k, "evolution");
        c.evolution.p_crossover =
            detail::field(e, "p_crossover", c.evolution.p_crossover, "evolution");
        c.evolution.p_mutate_replace =
            detail::field(e, "p_mutate_replace", c.evolution.p_mutate_replace, "evolution");
        c.evolution.p_mutate_insert =
            detail::field(e, "p_mutate_insert", c.evolution.p_mutate_insert, "evolution");
        c.evolution.p_mutate_delete =
            detail::field(e, "p_mutate_delete", c.evolution.p_mutate_delete, "evolution");
        c.evolution.max_generations =
            detail::field(e, "max_generations", c.evolution.max_generations, "evolution");
        c.evolution.stagnation_window =
            detail::field(e, "stagnation_window", c.evolution.stagnation_window, "evolution");
        c.evolution.elitism = detail::field(e, "elitism", c.evolution.elitism, "evolution");
    }
    if (j.contains("fitness")) {
        const auto& f = j.at("fitness");
        c.fitness.alpha = detail::field(f, "alpha", c.fitness.alpha, "fitness");
        c.fitness.beta = detail::field(f, "beta", c.fitness.beta, "fitness");
        c.fitness.floor = detail::field(f, "floor", c.fitness.floor, "fitness");
    }
    if (j.contains("network")) {
        const auto& n = j.at("network");
        c.network.p0 = detail::field(n, "p0", c.network.p0, "network");
        c.network.p_min = detail::field(n, "p_min", c.network.p_min, "network");
        c.network.p_max = detail::field(n, "p_max", c.network.p_max, "network");
        c.network.eta = detail::field(n, "eta", c.network.eta, "network");
        c.network.pending_window =
            detail::field(n, "pending_window", c.network.pending_window, "network");
        c.network.deployed_cap = detail::field(n, "deployed_cap", c.network.deployed_cap, "network");
        c.network.pool_cap = detail::field(n, "pool_cap", c.network.pool_cap, "network");
        c.network.topology_threshold =
            detail::field(n, "topology_threshold", c.network.topology_threshold, "network");
    }
    if (j.contains("measurement")) {
        const auto& m = j.at("measurement");
        c.measurement.steps =
            detail::field(m, "steps", c.measurement.steps, "measurement");
        c.measurement.collect_all_outputs = detail::field(
            m, "collect_all_outputs", c.measurement.collect_all_outputs, "measurement");
    }
    return c;
}

/// Experiment config: either {"run": {...}, "n_runs": N} or a bare RunConfig
/// object (n_runs then keeps its default).
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j)
{
    ExperimentConfig c;
    if (j.contains("run") || j.contains("n_runs")) {
        for (const auto& [key, child] : j.items()) {
            if (key != "run" && key != "n_runs") {
                throw ConfigError(key + ": unknown config key (experiment configs hold "
                                  "\"run\" and \"n_runs\")");
            }
        }
        if (j.contains("run")) {
            c.run = run_config_from_json(j.at("run"));
        }
        c.n_runs = detail::field(j, "n_runs", c.n_runs, "");
    } else {
        c.run = run_config_from_json(j);
    }
    return c;
}

/// Applies `key=value` with a dotted path onto a config JSON document. The
/// path must reference an existing key; scalars are parsed to the type
/// already present at the path.
inline void apply_override(nlohmann::json& config, const std::string& dotted_key,
                           const std::string& value)
{
    nlohmann::json* node = &config;
    std::size_t start = 0;
    std::string path_so_far;
    for (;;) {
        const std::size_t dot = dotted_key.find('.', start);
        const std::string part = dotted_key.substr(start, dot - start);
        path_so_far += (path_so_far.empty() ? "" : ".") + part;
        if (!node->is_object() || !node->contains(part)) {
            throw ConfigError(path_so_far + ": unknown config key");
        }
        node = &(*node)[part];
        if (dot == std::string::npos) {
            break;
        }
        start = dot + 1;
    }
    try {
        if (node->is_string()) {
            *node = value;
        } else {
            *node = nlohmann::json::parse(value);
        }
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(dotted_key + ": cannot parse override value \"" + value + "\"");
    }
}

} // namespace decosim
