// Command-line front end: validate configs, run experiments, compare results.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gradsurg/config.hpp"
#include "gradsurg/runner.hpp"

namespace {

bool read_file(const std::string& path, std::string& out, std::string& error) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        error = "cannot read " + path;
        return false;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    out = buf.str();
    return true;
}

int load_config(const std::string& path, gradsurg::ExperimentConfig& config) {
    std::string text;
    std::string error;
    if (!read_file(path, text, error)) {
        std::cerr << "error: " << error << "\n";
        return 2;
    }
    gradsurg::ConfigParseResult parsed = gradsurg::parse_config(text);
    for (const std::string& w : parsed.warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    if (!parsed.ok()) {
        std::cerr << "invalid config " << path << ":\n";
        for (const std::string& e : parsed.errors) {
            std::cerr << "  - " << e << "\n";
        }
        return 2;
    }
    config = *parsed.config;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multitask gradient surgery experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_override;
    std::uint64_t seed_override = 0;
    std::size_t repeats_override = 0;
    bool has_seed_override = false;

    CLI::App* run_cmd = app.add_subcommand("run", "Run the experiment in a config");
    run_cmd->add_option("config", config_path, "Config JSON file")->required();
    run_cmd->add_option("--output", output_override, "Override config output_path");
    run_cmd->add_option("--seed", seed_override, "Override config seed")
        ->each([&](const std::string&) { has_seed_override = true; });
    run_cmd->add_option("--repeats", repeats_override, "Override config repeats");

    CLI::App* validate_cmd =
        app.add_subcommand("validate", "Parse and validate a config");
    validate_cmd->add_option("config", config_path, "Config JSON file")->required();

    std::vector<std::string> summary_paths;
    CLI::App* compare_cmd =
        app.add_subcommand("compare", "Compare run summaries against the first");
    compare_cmd->add_option("summaries", summary_paths, "summary.json files");

    CLI11_PARSE(app, argc, argv);

    if (validate_cmd->parsed()) {
        gradsurg::ExperimentConfig config;
        const int rc = load_config(config_path, config);
        if (rc == 0) {
            std::cout << "valid\n";
        }
        return rc;
    }

    if (run_cmd->parsed()) {
        gradsurg::ExperimentConfig config;
        const int rc = load_config(config_path, config);
        if (rc != 0) {
            return rc;
        }
        if (!output_override.empty()) {
            config.output_path = output_override;
        }
        if (has_seed_override) {
            config.seed = seed_override;
        }
        if (repeats_override > 0) {
            config.repeats = repeats_override;
        }
        try {
            return gradsurg::run_experiment(config, std::cerr);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
    }

    if (compare_cmd->parsed()) {
        try {
            return gradsurg::compare_summaries(summary_paths, std::cout, std::cerr);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
    }

    return 0;
}
