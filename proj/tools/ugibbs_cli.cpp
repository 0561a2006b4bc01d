#include "CLI11.hpp"
#include "ugibbs/experiment.hpp"

#include <filesystem>
#include <iostream>

using namespace ugibbs;

namespace {

int fail(const std::string& kind, const std::string& what, int code) {
    std::cerr << nlohmann::json{{"error", kind}, {"message", what}}.dump() << '\n';
    return code;
}

void emit(const nlohmann::json& j, const std::string& format) {
    if (format == "csv") std::cout << flatten_csv(j);
    else std::cout << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"u-Gibbs state experiments"};
    app.require_subcommand(1);
    std::string format = "json";
    unsigned workers = 1;
    app.add_option("--format", format, "stdout format")->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);

    auto* run = app.add_subcommand("run", "run the tasks of a config");
    std::string config, out;
    std::optional<std::string> seed;
    run->add_option("--config", config, "config file")->required();
    run->add_option("--out", out, "output directory");
    run->add_option("--seed", seed, "seed override (u64)");

    auto* compare = app.add_subcommand("compare", "compare two run directories");
    std::string dir_a, dir_b;
    compare->add_option("dir_a", dir_a)->required();
    compare->add_option("dir_b", dir_b)->required();

    auto* list = app.add_subcommand("list-systems", "systems and their keys");

    // global flags may follow the subcommand
    for (auto* sub : {run, compare, list}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("ConfigError", e.what(), 2);
    }
    set_worker_count(workers);

    try {
        if (*run) {
            ExperimentConfig cfg = load_config(config);
            if (seed) override_value(cfg, "seed", *seed);
            if (out.empty()) out = cfg.text("out");
            if (out.empty()) out = "runs/" + std::filesystem::path(config).stem().string();
            const RunResult r = run_experiment(cfg, out);
            emit(r.summary, format);
            return r.failed ? 1 : 0;
        }
        if (*compare) {
            emit(compare_runs(dir_a, dir_b), format);
            return 0;
        }
        emit(list_systems(), format);
        return 0;
    } catch (const Error& e) {
        return fail(error_name(e.code()), e.what(), e.code() == ErrorCode::ConfigError ? 2 : 1);
    } catch (const std::exception& e) {
        return fail("Internal", e.what(), 1);
    }
}
