#pragma once

// File emission shared by the CLI and the test suites: experiment report
// bundles (report.json + per-checkpoint histogram CSVs + topology snapshot)
// and single-run output bundles.

#include "decosim/harness.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace decosim {

inline void write_text_file(const std::filesystem::path& path, const std::string& contents)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw SimError("cannot write " + path.string());
    }
    out << contents;
}

/// report.json, size_hist[_<step>].csv, attr_hist[_<step>].csv, topology.csv.
/// The unsuffixed CSVs carry the final measurement step.
inline void write_experiment_outputs(const ExperimentReport& report,
                                     const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    write_text_file(dir / "report.json", to_json(report).dump(2) + "\n");
    const auto size_probs = pmf(report.config.run.users.length_dist);
    const auto attr_probs = pmf(report.config.run.users.modularity_dist);
    for (const MergedMeasurement& m : report.measurements) {
        std::ostringstream size_csv;
        write_histogram_csv(size_csv, m.size_histogram, size_probs);
        std::ostringstream attr_csv;
        write_histogram_csv(attr_csv, m.attr_histogram, attr_probs);
        const std::string suffix = "_" + std::to_string(m.step) + ".csv";
        write_text_file(dir / ("size_hist" + suffix), size_csv.str());
        write_text_file(dir / ("attr_hist" + suffix), attr_csv.str());
        if (&m == &report.measurements.back()) {
            write_text_file(dir / "size_hist.csv", size_csv.str());
            write_text_file(dir / "attr_hist.csv", attr_csv.str());
        }
    }
    write_text_file(dir / "topology.csv", report.first_run_topology_csv);
}

/// run_result.json, final-step histogram CSVs, topology.csv.
inline void write_run_outputs(const RunResult& result, const RunConfig& config,
                              const RunArtifacts& artifacts, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    write_text_file(dir / "run_result.json", to_json(result, config).dump(2) + "\n");
    if (!result.measurements.empty()) {
        const MeasurementSnapshot& last = result.measurements.back();
        std::ostringstream size_csv;
        write_histogram_csv(size_csv, last.size_histogram, pmf(config.users.length_dist));
        write_text_file(dir / "size_hist.csv", size_csv.str());
        std::ostringstream attr_csv;
        write_histogram_csv(attr_csv, last.attr_histogram, pmf(config.users.modularity_dist));
        write_text_file(dir / "attr_hist.csv", attr_csv.str());
    }
    std::ostringstream topology_csv;
    write_topology_csv(topology_csv, artifacts.network);
    write_text_file(dir / "topology.csv", topology_csv.str());
}

} // namespace decosim
