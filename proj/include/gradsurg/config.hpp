#ifndef GRADSURG_CONFIG_HPP
#define GRADSURG_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gradsurg/problems.hpp"
#include "gradsurg/train.hpp"
#include "gradsurg/weighting.hpp"

namespace gradsurg {

enum class PolicyKind { kUniform, kStatic, kDtp };

struct PhaseConfig {
    std::size_t start_epoch = 0;
    std::size_t end_epoch = 0;
    std::vector<double> probs;

    bool operator==(const PhaseConfig& other) const = default;
};

struct PolicyConfig {
    PolicyKind kind = PolicyKind::kUniform;
    double gamma = 2.0;                                  // dtp
    std::optional<std::vector<double>> scale_overrides;  // dtp
    std::vector<PhaseConfig> phases;                     // static

    bool operator==(const PolicyConfig& other) const = default;
};

/// Declarative run description, parsed from versioned JSON. See README for
/// the schema. Unknown keys are rejected; validation reports every violation.
struct ExperimentConfig {
    int schema_version = 1;
    SyntheticProblem problem;
    CombineMethod method = CombineMethod::kSum;
    std::optional<PolicyConfig> policy;
    std::size_t epochs = 20;
    double lr = 0.01;
    std::uint64_t seed = 0;
    GradScope scope = GradScope::kSharedOnly;
    std::string output_path = "results";
    std::size_t repeats = 1;

    bool operator==(const ExperimentConfig& other) const = default;
};

struct ConfigParseResult {
    std::optional<ExperimentConfig> config;
    std::vector<std::string> errors;
    std::vector<std::string> warnings;

    bool ok() const { return config.has_value(); }
};

/// Parses and validates config text. On failure, `errors` lists every
/// violation found, not just the first.
ConfigParseResult parse_config(const std::string& text);

/// Canonical JSON for a config; parse_config(render_config(c)) == c.
std::string render_config(const ExperimentConfig& config);

/// Instantiates the configured weight policy (pcgrad/sum runs fall back to
/// uniform when none is given).
std::unique_ptr<WeightPolicy> make_policy(const ExperimentConfig& config);

} // namespace gradsurg

#endif
