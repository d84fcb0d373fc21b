// Command-line front end: single runs, multi-run experiments, the six-scenario
// distribution suite, topology snapshots, and config validation.
//
// Exit codes: 0 success, 1 config error, 2 run failure.

#include "decosim/config.hpp"
#include "decosim/harness.hpp"
#include "decosim/io.hpp"
#include "decosim/scenarios.hpp"
#include "decosim/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

using nlohmann::json;

struct CommonOptions {
    std::string config_path;
    std::string out_dir = "out";
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> steps;
    std::optional<std::size_t> runs;
    unsigned parallelism = std::max(1u, std::thread::hardware_concurrency());
};

void add_common_options(CLI::App* command, CommonOptions& options, bool with_runs)
{
    command->add_option("--config", options.config_path, "Config file (JSON); defaults used if omitted");
    command->add_option("--out", options.out_dir, "Output directory");
    command->add_option("--set", options.overrides, "Config override key=value (dotted path)");
    command->add_option("--seed", options.seed, "Seed override");
    command->add_option("--steps", options.steps, "Steps override");
    if (with_runs) {
        command->add_option("--runs", options.runs, "Number of runs");
        command->add_option("--parallel", options.parallelism, "Worker threads");
    }
}

json load_config_json(const CommonOptions& options, bool experiment)
{
    json config;
    if (options.config_path.empty()) {
        config = experiment ? decosim::to_json(decosim::ExperimentConfig{})
                            : decosim::to_json(decosim::RunConfig{});
    } else {
        std::ifstream in(options.config_path);
        if (!in) {
            throw decosim::ConfigError("config file not found: " + options.config_path);
        }
        try {
            in >> config;
        } catch (const json::exception& e) {
            throw decosim::ConfigError("config file does not parse: " + std::string(e.what()));
        }
        if (experiment && !config.contains("run") && !config.contains("n_runs")) {
            config = json{{"run", config}, {"n_runs", decosim::ExperimentConfig{}.n_runs}};
        }
    }
    for (const std::string& override_spec : options.overrides) {
        const auto eq = override_spec.find('=');
        if (eq == std::string::npos) {
            throw decosim::ConfigError("override must be key=value: " + override_spec);
        }
        std::string key = override_spec.substr(0, eq);
        if (experiment && key != "n_runs" && key.rfind("run.", 0) != 0) {
            key = "run." + key;
        }
        decosim::apply_override(config, key, override_spec.substr(eq + 1));
    }
    return config;
}

void require_valid(const decosim::RunConfig& config)
{
    const auto violations = decosim::validate_config(config);
    if (!violations.empty()) {
        std::string message = "invalid config:";
        for (const auto& violation : violations) {
            message += "\n  " + violation;
        }
        throw decosim::ConfigError(message);
    }
}

int command_validate(const CommonOptions& options)
{
    const decosim::RunConfig config =
        decosim::experiment_config_from_json(load_config_json(options, true)).run;
    const auto violations = decosim::validate_config(config);
    if (violations.empty()) {
        std::cout << "config ok\n";
        return 0;
    }
    for (const auto& violation : violations) {
        std::cerr << violation << "\n";
    }
    return 1;
}

int command_run(const CommonOptions& options)
{
    decosim::RunConfig config = decosim::run_config_from_json(load_config_json(options, false));
    if (options.seed) {
        config.seed = *options.seed;
    }
    if (options.steps) {
        config.steps = *options.steps;
    }
    require_valid(config);
    decosim::RunArtifacts artifacts;
    const decosim::RunResult result = decosim::run_simulation(config, &artifacts);
    const std::filesystem::path dir(options.out_dir);
    decosim::write_run_outputs(result, config, artifacts, dir);
    std::cout << "run complete: " << result.counters.requests_served << " requests, "
              << result.counters.migrations << " migrations, outputs in " << dir.string() << "\n";
    return 0;
}

decosim::ExperimentConfig experiment_config(const CommonOptions& options)
{
    decosim::ExperimentConfig config =
        decosim::experiment_config_from_json(load_config_json(options, true));
    if (options.seed) {
        config.run.seed = *options.seed;
    }
    if (options.steps) {
        config.run.steps = *options.steps;
    }
    if (options.runs) {
        config.n_runs = *options.runs;
    }
    require_valid(config.run);
    return config;
}

int command_experiment(const CommonOptions& options)
{
    const decosim::ExperimentConfig config = experiment_config(options);
    const decosim::ExperimentReport report = decosim::run_experiment(config, options.parallelism);
    decosim::write_experiment_outputs(report, options.out_dir);
    std::cout << "experiment complete: " << (config.n_runs - report.failures.size()) << "/"
              << config.n_runs << " runs, outputs in " << options.out_dir << "\n";
    if (!report.failures.empty()) {
        for (const decosim::RunFailure& failure : report.failures) {
            std::cerr << "run with seed " << failure.seed << " failed: " << failure.message << "\n";
        }
        return 2;
    }
    return 0;
}

int command_paper_suite(const CommonOptions& options)
{
    const decosim::ExperimentConfig base = experiment_config(options);
    const std::filesystem::path dir(options.out_dir);
    std::filesystem::create_directories(dir);

    json summary;
    summary["tool"] = {{"name", decosim::kToolName}, {"version", decosim::kToolVersion}};
    summary["scenarios"] = json::array();
    int exit_code = 0;
    std::cout << "scenario              property    chi2      strict(0.95)  standard(0.05)\n";
    for (const decosim::Scenario& scenario : decosim::paper_suite_scenarios()) {
        const decosim::ExperimentConfig config = decosim::apply_scenario(base, scenario);
        const decosim::ExperimentReport report =
            decosim::run_experiment(config, options.parallelism);
        decosim::write_experiment_outputs(report, dir / scenario.name);
        if (!report.failures.empty()) {
            exit_code = 2;
        }

        json entry = {{"scenario", scenario.name},
                      {"varies", scenario.varies_length ? "length" : "modularity"},
                      {"report", "./" + scenario.name + "/report.json"}};
        if (!report.measurements.empty()) {
            const decosim::MergedMeasurement& final_measurement = report.measurements.back();
            const auto& chi = scenario.varies_length ? final_measurement.size_chi
                                                     : final_measurement.attr_chi;
            if (chi) {
                entry["chi_squared"] = decosim::to_json(*chi);
                std::ostringstream line;
                line.setf(std::ios::fixed);
                line.precision(3);
                line << scenario.name;
                for (std::size_t pad = scenario.name.size(); pad < 22; ++pad) {
                    line << ' ';
                }
                line << (scenario.varies_length ? "size        " : "attributes  ")
                     << chi->statistic << "     " << (chi->pass_paper_convention ? "pass" : "fail")
                     << "          " << (chi->pass_standard ? "pass" : "fail");
                std::cout << line.str() << "\n";
            }
        }
        entry["failed_runs"] = report.failures.size();
        summary["scenarios"].push_back(std::move(entry));
    }
    decosim::write_text_file(dir / "summary.json", summary.dump(2) + "\n");
    std::cout << "suite outputs in " << dir.string() << "\n";
    return exit_code;
}

int command_topology_report(const CommonOptions& options)
{
    decosim::RunConfig config = decosim::run_config_from_json(load_config_json(options, false));
    if (options.seed) {
        config.seed = *options.seed;
    }
    if (options.steps) {
        config.steps = *options.steps;
    }
    require_valid(config);
    decosim::RunArtifacts artifacts;
    const decosim::RunResult result = decosim::run_simulation(config, &artifacts);
    const std::filesystem::path dir(options.out_dir);
    std::filesystem::create_directories(dir);
    std::ostringstream topology_csv;
    decosim::write_topology_csv(topology_csv, artifacts.network);
    decosim::write_text_file(dir / "topology.csv", topology_csv.str());
    json metrics = {{"tool", {{"name", decosim::kToolName}, {"version", decosim::kToolVersion}}},
                    {"config", decosim::to_json(config)},
                    {"measurements", json::array()}};
    for (const decosim::MeasurementSnapshot& m : result.measurements) {
        metrics["measurements"].push_back({{"step", m.step},
                                           {"topology", decosim::to_json(m.topology)},
                                           {"mean_p_intra", m.mean_p_intra},
                                           {"mean_p_inter", m.mean_p_inter}});
    }
    decosim::write_text_file(dir / "topology_metrics.json", metrics.dump(2) + "\n");
    std::cout << "topology report in " << dir.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Digital-ecosystem simulator: habitat networks of evolving service-agent "
                 "populations under configurable user request models"};
    app.set_version_flag("--version", std::string(decosim::kToolVersion));
    app.require_subcommand(1);

    CommonOptions options;
    CLI::App* validate = app.add_subcommand("validate", "Check a config against all invariants");
    add_common_options(validate, options, false);
    CLI::App* run = app.add_subcommand("run", "Execute a single simulation run");
    add_common_options(run, options, false);
    CLI::App* experiment = app.add_subcommand("experiment", "Execute a multi-run experiment");
    add_common_options(experiment, options, true);
    CLI::App* suite = app.add_subcommand(
        "paper-suite", "Run all six request-distribution scenarios and write a summary");
    add_common_options(suite, options, true);
    CLI::App* topology =
        app.add_subcommand("topology-report", "Run one simulation and export the topology");
    add_common_options(topology, options, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (validate->parsed()) {
            return command_validate(options);
        }
        if (run->parsed()) {
            return command_run(options);
        }
        if (experiment->parsed()) {
            return command_experiment(options);
        }
        if (suite->parsed()) {
            return command_paper_suite(options);
        }
        if (topology->parsed()) {
            return command_topology_report(options);
        }
    } catch (const decosim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
