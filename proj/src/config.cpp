#include "gradsurg/config.hpp"

#include <cmath>
#include <set>
#include <stdexcept>
#include <utility>

#include <json.hpp>

namespace gradsurg {

namespace {

using nlohmann::json;

constexpr double kPi = 3.14159265358979323846;

std::string kind_to_string(ProblemKind kind) {
    switch (kind) {
        case ProblemKind::kConflictingQuadratics: return "conflicting_quadratics";
        case ProblemKind::kSharedFeatureRegression: return "shared_feature_regression";
        case ProblemKind::kMultilabelClassification: return "multilabel_classification";
    }
    return "unknown";
}

std::string policy_kind_to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::kUniform: return "uniform";
        case PolicyKind::kStatic: return "static";
        case PolicyKind::kDtp: return "dtp";
    }
    return "unknown";
}

std::string scope_to_string(GradScope scope) {
    return scope == GradScope::kSharedOnly ? "shared_only" : "full";
}

/// Collects every violation instead of stopping at the first one.
struct Check {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;

    void fail(const std::string& msg) { errors.push_back(msg); }
    void warn(const std::string& msg) { warnings.push_back(msg); }

    void reject_unknown_keys(const json& obj, const std::string& path,
                             const std::set<std::string>& allowed) {
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (!allowed.count(it.key())) {
                fail(path + ": unknown key '" + it.key() + "'");
            }
        }
    }

    bool require(const json& obj, const std::string& path, const char* key) {
        if (!obj.contains(key)) {
            fail(path + ": missing required key '" + std::string(key) + "'");
            return false;
        }
        return true;
    }

    std::optional<std::uint64_t> get_uint(const json& obj, const std::string& path,
                                          const char* key) {
        if (!obj.contains(key)) {
            return std::nullopt;
        }
        const json& v = obj.at(key);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                       v.get<std::int64_t>() < 0)) {
            fail(path + "." + key + ": expected a non-negative integer");
            return std::nullopt;
        }
        return v.get<std::uint64_t>();
    }

    std::optional<double> get_double(const json& obj, const std::string& path,
                                     const char* key) {
        if (!obj.contains(key)) {
            return std::nullopt;
        }
        const json& v = obj.at(key);
        if (!v.is_number()) {
            fail(path + "." + key + ": expected a number");
            return std::nullopt;
        }
        return v.get<double>();
    }

    std::optional<std::string> get_string(const json& obj, const std::string& path,
                                          const char* key) {
        if (!obj.contains(key)) {
            return std::nullopt;
        }
        const json& v = obj.at(key);
        if (!v.is_string()) {
            fail(path + "." + key + ": expected a string");
            return std::nullopt;
        }
        return v.get<std::string>();
    }

    std::optional<std::vector<double>> get_double_array(const json& obj,
                                                        const std::string& path,
                                                        const char* key) {
        if (!obj.contains(key)) {
            return std::nullopt;
        }
        const json& v = obj.at(key);
        if (!v.is_array()) {
            fail(path + "." + key + ": expected an array of numbers");
            return std::nullopt;
        }
        std::vector<double> out;
        out.reserve(v.size());
        for (const json& e : v) {
            if (!e.is_number()) {
                fail(path + "." + key + ": expected an array of numbers");
                return std::nullopt;
            }
            out.push_back(e.get<double>());
        }
        return out;
    }
};

void parse_problem(Check& check, const json& obj, SyntheticProblem& problem) {
    const std::string path = "problem";
    check.reject_unknown_keys(obj, path,
                              {"kind", "task_count", "input_dim", "conflict_angle_deg",
                               "noise_std", "seed", "batch_size",
                               "iterations_per_epoch"});
    bool is_quadratics = false;
    if (check.require(obj, path, "kind")) {
        if (auto kind = check.get_string(obj, path, "kind")) {
            if (*kind == "conflicting_quadratics") {
                problem.kind = ProblemKind::kConflictingQuadratics;
                is_quadratics = true;
            } else if (*kind == "shared_feature_regression") {
                problem.kind = ProblemKind::kSharedFeatureRegression;
            } else if (*kind == "multilabel_classification") {
                problem.kind = ProblemKind::kMultilabelClassification;
            } else {
                check.fail(path + ".kind: unknown problem kind '" + *kind + "'");
            }
        }
    }
    if (check.require(obj, path, "task_count")) {
        if (auto v = check.get_uint(obj, path, "task_count")) {
            if (*v < 2) {
                check.fail(path + ".task_count: must be >= 2");
            } else {
                problem.task_count = static_cast<std::size_t>(*v);
            }
        }
    }
    if (check.require(obj, path, "input_dim")) {
        if (auto v = check.get_uint(obj, path, "input_dim")) {
            if (*v == 0) {
                check.fail(path + ".input_dim: must be >= 1");
            } else {
                problem.input_dim = static_cast<std::size_t>(*v);
            }
        }
    }
    if (obj.contains("conflict_angle_deg")) {
        if (!is_quadratics) {
            check.fail(path + ".conflict_angle_deg: only valid for "
                       "conflicting_quadratics problems");
        } else if (auto v = check.get_double(obj, path, "conflict_angle_deg")) {
            problem.conflict_angle_deg = *v;
        }
    }
    if (auto v = check.get_double(obj, path, "noise_std")) {
        problem.noise_std = *v;
    }
    if (auto v = check.get_uint(obj, path, "seed")) {
        problem.seed = *v;
    }
    if (auto v = check.get_uint(obj, path, "batch_size")) {
        problem.batch_size = static_cast<std::size_t>(*v);
    }
    if (auto v = check.get_uint(obj, path, "iterations_per_epoch")) {
        problem.iterations_per_epoch = static_cast<std::size_t>(*v);
    }

    if (!(problem.noise_std >= 0.0) || !std::isfinite(problem.noise_std)) {
        check.fail(path + ".noise_std: must be finite and >= 0");
    }
    if (problem.batch_size == 0) {
        check.fail(path + ".batch_size: must be >= 1");
    }
    if (problem.iterations_per_epoch == 0) {
        check.fail(path + ".iterations_per_epoch: must be >= 1");
    }
    if (is_quadratics) {
        if (!(problem.conflict_angle_deg > 90.0 && problem.conflict_angle_deg <= 180.0)) {
            check.fail(path + ".conflict_angle_deg: must be in (90, 180]");
        } else if (problem.task_count >= 2) {
            const double target = std::cos(problem.conflict_angle_deg * kPi / 180.0);
            const double floor_cos =
                -1.0 / static_cast<double>(problem.task_count - 1);
            if (target < floor_cos - 1e-12) {
                check.fail(path + ".conflict_angle_deg: infeasible for " +
                           std::to_string(problem.task_count) +
                           " tasks (max angle is about " +
                           std::to_string(std::acos(floor_cos) * 180.0 / kPi) +
                           " degrees)");
            }
            if (problem.input_dim < problem.task_count) {
                check.fail(path + ".input_dim: quadratics need input_dim >= task_count");
            }
        }
    }
}

void parse_policy(Check& check, const json& obj, const ExperimentConfig& config,
                  PolicyConfig& policy) {
    const std::string path = "policy";
    if (!check.require(obj, path, "kind")) {
        return;
    }
    auto kind = check.get_string(obj, path, "kind");
    if (!kind) {
        return;
    }
    if (*kind == "uniform") {
        policy.kind = PolicyKind::kUniform;
        check.reject_unknown_keys(obj, path, {"kind"});
    } else if (*kind == "static") {
        policy.kind = PolicyKind::kStatic;
        check.reject_unknown_keys(obj, path, {"kind", "phases"});
        if (!check.require(obj, path, "phases")) {
            return;
        }
        const json& phases = obj.at("phases");
        if (!phases.is_array() || phases.empty()) {
            check.fail(path + ".phases: expected a non-empty array");
            return;
        }
        for (std::size_t i = 0; i < phases.size(); ++i) {
            const std::string ppath = path + ".phases[" + std::to_string(i) + "]";
            const json& ph = phases[i];
            if (!ph.is_object()) {
                check.fail(ppath + ": expected an object");
                continue;
            }
            check.reject_unknown_keys(ph, ppath, {"start_epoch", "end_epoch", "probs"});
            PhaseConfig pc;
            bool have_all = true;
            if (check.require(ph, ppath, "start_epoch")) {
                if (auto v = check.get_uint(ph, ppath, "start_epoch")) {
                    pc.start_epoch = static_cast<std::size_t>(*v);
                } else {
                    have_all = false;
                }
            } else {
                have_all = false;
            }
            if (check.require(ph, ppath, "end_epoch")) {
                if (auto v = check.get_uint(ph, ppath, "end_epoch")) {
                    pc.end_epoch = static_cast<std::size_t>(*v);
                } else {
                    have_all = false;
                }
            } else {
                have_all = false;
            }
            if (check.require(ph, ppath, "probs")) {
                if (auto v = check.get_double_array(ph, ppath, "probs")) {
                    pc.probs = *v;
                } else {
                    have_all = false;
                }
            } else {
                have_all = false;
            }
            if (have_all) {
                if (pc.end_epoch <= pc.start_epoch) {
                    check.fail(ppath + ": end_epoch must exceed start_epoch");
                }
                if (pc.probs.size() != config.problem.task_count) {
                    check.fail(ppath + ".probs: expected one probability per task");
                } else {
                    try {
                        TaskDistribution dist(pc.probs);
                        (void)dist;
                    } catch (const std::exception& e) {
                        check.fail(ppath + ".probs: " + e.what());
                    }
                }
                policy.phases.push_back(std::move(pc));
            }
        }
        // Contiguity and coverage of [0, epochs).
        if (!policy.phases.empty()) {
            if (policy.phases.front().start_epoch != 0) {
                check.fail(path + ".phases: first phase must start at epoch 0");
            }
            for (std::size_t i = 1; i < policy.phases.size(); ++i) {
                if (policy.phases[i].start_epoch != policy.phases[i - 1].end_epoch) {
                    check.fail(path + ".phases: phases must be contiguous at index " +
                               std::to_string(i));
                }
            }
            if (policy.phases.back().end_epoch != config.epochs) {
                check.fail(path + ".phases: phases must cover [0, epochs) exactly "
                           "(last end_epoch is " +
                           std::to_string(policy.phases.back().end_epoch) +
                           ", epochs is " + std::to_string(config.epochs) + ")");
            }
        }
    } else if (*kind == "dtp") {
        policy.kind = PolicyKind::kDtp;
        check.reject_unknown_keys(obj, path, {"kind", "gamma", "scale_overrides"});
        if (auto v = check.get_double(obj, path, "gamma")) {
            policy.gamma = *v;
        }
        if (!(policy.gamma >= 0.0) || !std::isfinite(policy.gamma)) {
            check.fail(path + ".gamma: must be finite and >= 0");
        }
        if (obj.contains("scale_overrides")) {
            if (auto v = check.get_double_array(obj, path, "scale_overrides")) {
                if (v->size() != config.problem.task_count) {
                    check.fail(path + ".scale_overrides: expected one factor per task");
                } else {
                    for (double s : *v) {
                        if (!(s > 0.0) || !std::isfinite(s)) {
                            check.fail(path +
                                       ".scale_overrides: factors must be > 0");
                            break;
                        }
                    }
                    policy.scale_overrides = std::move(*v);
                }
            }
        }
    } else {
        check.fail(path + ".kind: unknown policy kind '" + *kind + "'");
    }
}

} // namespace

ConfigParseResult parse_config(const std::string& text) {
    ConfigParseResult result;
    json root = json::parse(text, nullptr, false);
    if (root.is_discarded()) {
        result.errors.push_back("config is not valid JSON");
        return result;
    }
    if (!root.is_object()) {
        result.errors.push_back("config must be a JSON object");
        return result;
    }

    Check check;
    ExperimentConfig config;

    check.reject_unknown_keys(root, "config",
                              {"schema_version", "problem", "method", "policy",
                               "epochs", "lr", "seed", "scope", "output_path",
                               "repeats"});

    if (check.require(root, "config", "schema_version")) {
        if (auto v = check.get_uint(root, "config", "schema_version")) {
            config.schema_version = static_cast<int>(*v);
            if (config.schema_version != 1) {
                check.fail("config.schema_version: unsupported version " +
                           std::to_string(config.schema_version));
            }
        }
    }

    if (check.require(root, "config", "problem")) {
        if (root.at("problem").is_object()) {
            parse_problem(check, root.at("problem"), config.problem);
        } else {
            check.fail("config.problem: expected an object");
        }
    }

    if (check.require(root, "config", "method")) {
        if (auto v = check.get_string(root, "config", "method")) {
            if (*v == "sum") {
                config.method = CombineMethod::kSum;
            } else if (*v == "pcgrad") {
                config.method = CombineMethod::kPcgrad;
            } else if (*v == "wpcgrad") {
                config.method = CombineMethod::kWpcgrad;
            } else {
                check.fail("config.method: unknown method '" + *v + "'");
            }
        }
    }

    if (check.require(root, "config", "epochs")) {
        if (auto v = check.get_uint(root, "config", "epochs")) {
            if (*v == 0) {
                check.fail("config.epochs: must be >= 1");
            } else {
                config.epochs = static_cast<std::size_t>(*v);
            }
        }
    }
    if (check.require(root, "config", "lr")) {
        if (auto v = check.get_double(root, "config", "lr")) {
            config.lr = *v;
            if (!(config.lr > 0.0) || !std::isfinite(config.lr)) {
                check.fail("config.lr: must be positive and finite");
            }
        }
    }
    if (check.require(root, "config", "seed")) {
        if (auto v = check.get_uint(root, "config", "seed")) {
            config.seed = *v;
        }
    }
    if (auto v = check.get_string(root, "config", "scope")) {
        if (*v == "shared_only") {
            config.scope = GradScope::kSharedOnly;
        } else if (*v == "full") {
            config.scope = GradScope::kFull;
        } else {
            check.fail("config.scope: expected 'shared_only' or 'full'");
        }
    }
    if (auto v = check.get_string(root, "config", "output_path")) {
        config.output_path = *v;
    }
    if (auto v = check.get_uint(root, "config", "repeats")) {
        if (*v == 0) {
            check.fail("config.repeats: must be >= 1");
        } else {
            config.repeats = static_cast<std::size_t>(*v);
        }
    }

    if (root.contains("policy")) {
        if (root.at("policy").is_object()) {
            PolicyConfig policy;
            parse_policy(check, root.at("policy"), config, policy);
            config.policy = std::move(policy);
        } else {
            check.fail("config.policy: expected an object");
        }
    }

    if (config.method == CombineMethod::kWpcgrad && !config.policy) {
        check.fail("config.policy: required when method is wpcgrad");
    }
    if (config.method != CombineMethod::kWpcgrad && config.policy) {
        check.warn("config.policy: ignored for method '" + to_string(config.method) +
                   "'");
    }

    result.errors = std::move(check.errors);
    result.warnings = std::move(check.warnings);
    if (result.errors.empty()) {
        result.config = std::move(config);
    }
    return result;
}

std::string render_config(const ExperimentConfig& config) {
    json root;
    root["schema_version"] = config.schema_version;

    json problem;
    problem["kind"] = kind_to_string(config.problem.kind);
    problem["task_count"] = config.problem.task_count;
    problem["input_dim"] = config.problem.input_dim;
    if (config.problem.kind == ProblemKind::kConflictingQuadratics) {
        problem["conflict_angle_deg"] = config.problem.conflict_angle_deg;
    }
    problem["noise_std"] = config.problem.noise_std;
    problem["seed"] = config.problem.seed;
    problem["batch_size"] = config.problem.batch_size;
    problem["iterations_per_epoch"] = config.problem.iterations_per_epoch;
    root["problem"] = std::move(problem);

    root["method"] = to_string(config.method);
    if (config.policy) {
        json policy;
        policy["kind"] = policy_kind_to_string(config.policy->kind);
        if (config.policy->kind == PolicyKind::kDtp) {
            policy["gamma"] = config.policy->gamma;
            if (config.policy->scale_overrides) {
                policy["scale_overrides"] = *config.policy->scale_overrides;
            }
        }
        if (config.policy->kind == PolicyKind::kStatic) {
            json phases = json::array();
            for (const PhaseConfig& pc : config.policy->phases) {
                json ph;
                ph["start_epoch"] = pc.start_epoch;
                ph["end_epoch"] = pc.end_epoch;
                ph["probs"] = pc.probs;
                phases.push_back(std::move(ph));
            }
            policy["phases"] = std::move(phases);
        }
        root["policy"] = std::move(policy);
    }
    root["epochs"] = config.epochs;
    root["lr"] = config.lr;
    root["seed"] = config.seed;
    root["scope"] = scope_to_string(config.scope);
    root["output_path"] = config.output_path;
    root["repeats"] = config.repeats;

    return root.dump(2) + "\n";
}

std::unique_ptr<WeightPolicy> make_policy(const ExperimentConfig& config) {
    const std::size_t tasks = config.problem.task_count;
    if (!config.policy || config.method != CombineMethod::kWpcgrad) {
        return std::make_unique<UniformPolicy>(tasks);
    }
    switch (config.policy->kind) {
        case PolicyKind::kUniform:
            return std::make_unique<UniformPolicy>(tasks);
        case PolicyKind::kStatic: {
            std::vector<SchedulePhase> phases;
            phases.reserve(config.policy->phases.size());
            for (const PhaseConfig& pc : config.policy->phases) {
                phases.push_back(
                    {pc.start_epoch, pc.end_epoch, TaskDistribution(pc.probs)});
            }
            return std::make_unique<StaticSchedulePolicy>(
                StaticSchedule(std::move(phases)));
        }
        case PolicyKind::kDtp:
            return std::make_unique<DtpPolicy>(tasks, config.policy->gamma,
                                               config.policy->scale_overrides);
    }
    throw std::logic_error("make_policy: unknown policy kind");
}

} // namespace gradsurg
