#pragma once

#include "ugibbs/entropy.hpp"
#include "ugibbs/lyapunov.hpp"
#include "ugibbs/skeleton.hpp"

#include <map>

namespace ugibbs {

// Flat `key = value` file; `#` starts a comment. Keys are checked against the run keys and the
// keys of the chosen system; every key gets its default in the resolved config.
struct ExperimentConfig {
    std::string system;
    std::map<std::string, nlohmann::json> values;  // resolved, typed

    long integer(const std::string& key) const;
    double real(const std::string& key) const;
    bool flag(const std::string& key) const;
    std::string text(const std::string& key) const;
    std::vector<std::string> tasks() const;
    std::uint64_t seed() const;
    nlohmann::json to_json() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// Replace a value after parsing, with the same type checks.
void override_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

SystemModel build_system(const ExperimentConfig& cfg);

struct RunResult {
    nlohmann::json summary;
    bool failed = false;
};

// Runs the tasks in dependency order and writes summary.json and per-task CSVs into out_dir.
RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

// Certificates, entropies and component counts of two runs side by side. IncompatibleSystems
// when the system families or dimensions differ.
nlohmann::json compare_runs(const std::string& dir_a, const std::string& dir_b);

nlohmann::json list_systems();

// summary.json without the timestamp, as used for determinism checks.
std::string canonical_summary(const nlohmann::json& summary);
// Flattened "path,value" lines.
std::string flatten_csv(const nlohmann::json& j);

}  // namespace ugibbs
