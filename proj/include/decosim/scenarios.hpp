#pragma once

// The six request-distribution scenarios: user request length and modularity,
// each varied over Uniform, Gaussian and Power-Law shapes while the other
// property keeps its default distribution.

#include "decosim/config.hpp"

#include <string>
#include <vector>

namespace decosim {

struct Scenario {
    std::string name;
    bool varies_length = true; // otherwise varies modularity
    DistributionSpec dist;
};

inline std::vector<Scenario> paper_suite_scenarios()
{
    return {
        {"length_uniform", true, UniformSpec{1, 17}},
        {"length_gaussian", true, GaussianSpec{9.0, 3.0, 1, 17}},
        {"length_power_law", true, PowerLawSpec{1.5, 1, 17}},
        {"modularity_uniform", false, UniformSpec{1, 11}},
        {"modularity_gaussian", false, GaussianSpec{6.0, 2.0, 1, 11}},
        {"modularity_power_law", false, PowerLawSpec{1.5, 1, 11}},
    };
}

/// Applies a scenario to an experiment config and installs the quarter /
/// half / full-run measurement checkpoints when none are configured.
inline ExperimentConfig apply_scenario(ExperimentConfig config, const Scenario& scenario)
{
    if (scenario.varies_length) {
        config.run.users.length_dist = scenario.dist;
    } else {
        config.run.users.modularity_dist = scenario.dist;
    }
    if (config.run.measurement.steps.empty()) {
        for (const std::int64_t fraction : {4, 2, 1}) {
            config.run.measurement.steps.push_back(config.run.steps / fraction);
        }
    }
    return config;
}

} // namespace decosim
