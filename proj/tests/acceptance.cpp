// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Statistical criteria run on pinned seeds, so results are
// reproducible run to run.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gradsurg/config.hpp"
#include "gradsurg/metrics.hpp"
#include "gradsurg/problems.hpp"
#include "gradsurg/runner.hpp"
#include "gradsurg/surgery.hpp"
#include "gradsurg/train.hpp"
#include "test_support.hpp"

using namespace gradsurg;
using namespace gradsurg::testing;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail = "") {
    std::printf("[%s] criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", id, name,
                detail.empty() ? "" : " | ", detail.c_str());
    std::fflush(stdout);
    if (!pass) {
        ++g_failures;
    }
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. Composite detection score golden values.

void criterion_nds_golden() {
    struct Row {
        const char* label;
        DetectionErrors err; // mean_ap, mATE, mASE, mAOE, mAVE, mAAE
        double expected;
    };
    const std::vector<Row> rows = {
        {"baseline-small", {0.186, 0.895, 0.300, 0.704, 0.648, 0.215}, 0.317},
        {"small+pcgrad", {0.195, 0.898, 0.297, 0.698, 0.579, 0.212}, 0.329},
        {"small+weighted-seg-vel", {0.207, 0.904, 0.297, 0.667, 0.549, 0.213}, 0.341},
        {"small+weighted-vel-seg", {0.203, 0.891, 0.299, 0.690, 0.544, 0.203}, 0.339},
        {"small+weighted-dtp", {0.209, 0.901, 0.302, 0.635, 0.559, 0.214}, 0.344},
        {"unified+pcgrad", {0.181, 0.930, 0.315, 0.739, 0.646, 0.224}, 0.305},
        {"unified+weighted-dtp", {0.189, 0.910, 0.313, 0.756, 0.630, 0.218}, 0.312},
    };
    bool pass = true;
    std::string detail;
    for (const Row& row : rows) {
        const double got = nds(row.err);
        if (std::abs(got - row.expected) > 0.001) {
            pass = false;
            detail += std::string(row.label) + " got " + fmt(got) + " want " +
                      fmt(row.expected) + "; ";
        }
    }
    if (nds({1.0, 0, 0, 0, 0, 0}) != 1.0) {
        pass = false;
        detail += "perfect score is not 1.0; ";
    }
    if (pass) {
        detail = std::to_string(rows.size()) + " published rows within 0.001";
    }
    report(1, "detection-score golden values", pass, detail);
}

// ---------------------------------------------------------------------------
// 2. Projection property suite over 10,000 random gradient sets.

void criterion_projection_properties() {
    Rng rng(0xACCE5501);
    std::size_t checked = 0;
    std::string detail;
    bool pass = true;

    for (int rep = 0; rep < 10000 && pass; ++rep) {
        const std::size_t k = 2 + rng.uniform_below(7);   // 2..8
        const std::size_t dim = 2 + rng.uniform_below(63); // 2..64

        // (a) No-conflict inputs pass through bit-exactly.
        {
            const GradientSet grads = nonconflicting_gradient_set(rng, k, dim);
            FlatVector plain = grads.gradient(0);
            for (std::size_t t = 1; t < k; ++t) {
                plain = axpy(1.0, grads.gradient(t), plain);
            }
            const SurgeryReport pc = pcgrad(grads, rng.next_u64());
            const SurgeryReport wpc =
                wpcgrad(grads, TaskDistribution::uniform(k), rng.next_u64());
            if (pc.projections_applied != 0 || !(pc.combined == plain) ||
                wpc.projections_applied != 0 || !(wpc.combined == plain)) {
                pass = false;
                detail = "no-conflict passthrough broke at rep " + std::to_string(rep);
                break;
            }
        }

        // (b) First-sampled gradient preserved bit-exactly under wpcgrad.
        {
            const GradientSet grads = random_gradient_set(rng, k, dim, 2.0);
            std::vector<double> w(k);
            for (double& x : w) {
                x = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
            }
            bool all_zero = true;
            for (double x : w) {
                all_zero &= x == 0.0;
            }
            if (all_zero) {
                w[0] = 1.0;
            }
            const SurgeryReport wpc = wpcgrad(
                grads, TaskDistribution::from_weights(w), rng.next_u64());
            if (!wpc.unchanged_task.has_value() ||
                !(wpc.task_outputs[*wpc.unchanged_task] ==
                  grads.gradient(*wpc.unchanged_task))) {
                pass = false;
                detail = "first-sampled gradient modified at rep " + std::to_string(rep);
                break;
            }
        }

        // (c) Applied projections zero the dot within 1e-9 |v||p|.
        // (d) project_out is idempotent within 1e-12.
        {
            const FlatVector victim = random_vector(rng, dim, 2.0);
            const FlatVector projector = random_vector(rng, dim, 2.0);
            if (norm_sq(projector) >= kProjectionEps) {
                const FlatVector once = project_out(victim, projector);
                const double bound =
                    1e-9 * std::sqrt(norm_sq(victim) * norm_sq(projector));
                if (std::abs(dot(once, projector)) > bound) {
                    pass = false;
                    detail = "orthogonality bound broke at rep " + std::to_string(rep);
                    break;
                }
                const FlatVector twice = project_out(once, projector);
                double scale = 1.0;
                for (std::size_t i = 0; i < once.dim(); ++i) {
                    scale = std::max(scale, std::abs(once[i]));
                }
                for (std::size_t i = 0; i < once.dim(); ++i) {
                    if (std::abs(twice[i] - once[i]) > 1e-12 * scale) {
                        pass = false;
                        detail = "idempotence broke at rep " + std::to_string(rep);
                        break;
                    }
                }
            }
        }
        ++checked;
    }
    if (pass) {
        detail = std::to_string(checked) + " random sets checked";
    }
    report(2, "projection property suite", pass, detail);
}

// ---------------------------------------------------------------------------
// 3. Oracle equivalence on 1,000 random 2- and 3-task instances.

void criterion_oracle_equivalence() {
    Rng rng(0xACCE5503);
    bool pass = true;
    std::string detail;
    double worst = 0.0;
    for (int rep = 0; rep < 1000 && pass; ++rep) {
        const std::size_t k = 2 + rep % 2; // alternate 2- and 3-task
        const std::size_t dim = 2 + rng.uniform_below(63);
        const GradientSet grads = random_gradient_set(rng, k, dim, 2.0);
        const std::uint64_t seed = rng.next_u64();

        std::vector<std::vector<double>> raw;
        for (std::size_t t = 0; t < k; ++t) {
            raw.push_back(grads.gradient(t).values());
        }
        const std::vector<double> expect = oracle_combined(pcgrad_oracle(raw, seed));
        const SurgeryReport got = pcgrad(grads, seed);
        for (std::size_t c = 0; c < dim; ++c) {
            const double err = std::abs(got.combined[c] - expect[c]) /
                               std::max(1.0, std::abs(expect[c]));
            worst = std::max(worst, err);
            if (err > 1e-12) {
                pass = false;
                detail = "mismatch at rep " + std::to_string(rep) + ", component " +
                         std::to_string(c);
                break;
            }
        }
    }
    if (pass) {
        detail = "1000 instances, worst relative gap " + fmt(worst);
    }
    report(3, "brute-force oracle equivalence", pass, detail);
}

// ---------------------------------------------------------------------------
// 4. Weighted sampling fidelity over 100,000 seeds.

void criterion_sampling_fidelity() {
    Rng setup(0xACCE5504);
    const GradientSet grads = random_gradient_set(setup, 3, 4);
    const TaskDistribution dist({0.7, 0.2, 0.1});
    std::vector<std::size_t> counts(3, 0);
    const int n = 100000;
    for (int seed = 0; seed < n; ++seed) {
        const SurgeryReport rep = wpcgrad(grads, dist, seed);
        ++counts[*rep.unchanged_task];
    }
    bool pass = true;
    std::string detail;
    for (std::size_t t = 0; t < 3; ++t) {
        const double freq = counts[t] / static_cast<double>(n);
        detail += "task" + std::to_string(t) + "=" + fmt(freq) + " ";
        if (std::abs(freq - dist.prob(t)) > 0.01) {
            pass = false;
        }
    }
    report(4, "first-sampled frequency matches the distribution", pass, detail);
}

// ---------------------------------------------------------------------------
// 5. Dynamic prioritization unit values.

void criterion_dtp_values() {
    bool pass = true;
    std::string detail;

    DtpState skewed(2, 2.0, std::vector<double>{1.0, 1.0});
    const TaskDistribution d = skewed.update({2.0, 1.0});
    if (!(d.prob(0) == 0.8 && d.prob(1) == 0.2)) {
        pass = false;
        detail += "losses (2,1) gamma 2 gave (" + fmt(d.prob(0)) + "," +
                  fmt(d.prob(1)) + "); ";
    }

    DtpState flat(2, 0.0, std::vector<double>{1.0, 1.0});
    const TaskDistribution u = flat.update({2.0, 1.0});
    if (!(u.prob(0) == 0.5 && u.prob(1) == 0.5)) {
        pass = false;
        detail += "gamma 0 is not uniform; ";
    }

    DtpState state(3, 2.0, std::vector<double>{1.0, 1.0, 1.0});
    const TaskDistribution base = state.update({2.0, 1.0, 0.5});
    for (double c : {1e-6, 2.5, 1e6}) {
        const TaskDistribution scaled = state.update({2.0 * c, 1.0 * c, 0.5 * c});
        for (std::size_t t = 0; t < 3; ++t) {
            if (std::abs(scaled.prob(t) - base.prob(t)) > 1e-12) {
                pass = false;
                detail += "scaling invariance broke at c=" + fmt(c) + "; ";
            }
        }
    }
    if (pass) {
        detail = "exact values and scaling invariance hold";
    }
    report(5, "dynamic prioritization unit values", pass, detail);
}

// ---------------------------------------------------------------------------
// 6. Reverse-mode gradients against central finite differences.

ModelSpec random_model_spec(Rng& rng) {
    while (true) {
        ModelSpec spec;
        spec.input_dim = 1 + rng.uniform_below(6);
        const std::size_t trunk_layers = rng.uniform_below(3);
        for (std::size_t l = 0; l < trunk_layers; ++l) {
            spec.trunk_widths.push_back(1 + rng.uniform_below(7));
        }
        const std::size_t tasks = 2 + rng.uniform_below(3);
        for (std::size_t t = 0; t < tasks; ++t) {
            ModelSpec::HeadSpec head;
            if (rng.uniform() < 0.5) {
                head.loss = LossKind::kMeanSquaredError;
                head.output_dim = 1 + rng.uniform_below(3);
            } else {
                head.loss = LossKind::kCrossEntropy;
                head.output_dim = 2 + rng.uniform_below(3);
            }
            if (rng.uniform() < 0.3) {
                head.hidden_widths.push_back(1 + rng.uniform_below(5));
            }
            spec.heads.push_back(head);
        }
        if (MultitaskModel::init_zero(spec).param_count() <= 200) {
            return spec;
        }
    }
}

void criterion_gradient_check() {
    Rng rng(0xACCE5506);
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const ModelSpec spec = random_model_spec(rng);
        MultitaskModel model = MultitaskModel::init_random(spec, rng.next_u64());
        TaskBatch batch;
        batch.batch_size = 1 + rng.uniform_below(6);
        batch.input_dim = model.input_dim();
        batch.inputs.resize(batch.batch_size * batch.input_dim);
        for (double& x : batch.inputs) {
            x = rng.normal();
        }
        batch.targets.resize(model.task_count());
        for (TaskId t = 0; t < model.task_count(); ++t) {
            const std::size_t out = model.output_dim(t);
            batch.targets[t].assign(batch.batch_size * out, 0.0);
            if (model.loss_kind(t) == LossKind::kMeanSquaredError) {
                for (double& y : batch.targets[t]) {
                    y = rng.normal();
                }
            } else {
                for (std::size_t b = 0; b < batch.batch_size; ++b) {
                    batch.targets[t][b * out + rng.uniform_below(out)] = 1.0;
                }
            }
        }
        const TaskId task = rng.uniform_below(model.task_count());
        const FlatVector analytic = task_gradient(model, batch, task, GradScope::kFull);
        const FlatVector numeric = finite_diff_gradient(model, batch, task, 1e-5);
        for (std::size_t i = 0; i < analytic.dim(); ++i) {
            const double denom =
                std::max({1.0, std::abs(analytic[i]), std::abs(numeric[i])});
            worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
        }
    }
    report(6, "autodiff vs finite differences", worst <= 1e-5,
           "50 models, max relative error " + fmt(worst));
}

// ---------------------------------------------------------------------------
// 7. Prioritization direction on the two-task conflicting quadratics.

SyntheticProblem two_task_problem() {
    SyntheticProblem spec;
    spec.kind = ProblemKind::kConflictingQuadratics;
    spec.task_count = 2;
    spec.input_dim = 8;
    spec.conflict_angle_deg = 170.0;
    spec.noise_std = 0.05;
    spec.seed = 2024;
    spec.iterations_per_epoch = 25;
    return spec;
}

void criterion_prioritization_direction() {
    const SyntheticProblem spec = two_task_problem();
    TrainOptions options;
    options.epochs = 8;
    options.lr = 0.02;

    std::vector<double> favored_task0, uniform_task0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        options.seed = 31000 + s;
        {
            auto problem = make_problem(spec);
            StaticSchedulePolicy policy(
                StaticSchedule({{0, options.epochs, TaskDistribution({0.9, 0.1})}}));
            const TrainResult r =
                train(*problem, policy, CombineMethod::kWpcgrad, options);
            favored_task0.push_back(r.final_per_task_loss()[0]);
        }
        {
            auto problem = make_problem(spec);
            UniformPolicy policy(2);
            const TrainResult r =
                train(*problem, policy, CombineMethod::kWpcgrad, options);
            uniform_task0.push_back(r.final_per_task_loss()[0]);
        }
    }
    const MeanStats fav = mean_and_stderr(favored_task0);
    const MeanStats uni = mean_and_stderr(uniform_task0);
    const double gap = uni.mean - fav.mean;
    const double se = std::sqrt(fav.stderr_mean * fav.stderr_mean +
                                uni.stderr_mean * uni.stderr_mean);
    const bool pass = fav.mean < uni.mean && gap > 2.0 * se;
    report(7, "prioritized task trains further under conflict", pass,
           "favored=" + fmt(fav.mean) + "+/-" + fmt(fav.stderr_mean) +
               " uniform=" + fmt(uni.mean) + "+/-" + fmt(uni.stderr_mean) +
               " gap=" + fmt(gap) + " (2se=" + fmt(2.0 * se) + ")");
}

// ---------------------------------------------------------------------------
// 8. Training-dynamics analogue: summed loss ordering across methods.

void criterion_method_ordering() {
    // Four regression tasks reading opposed mixtures of one shared feature
    // map through a bottleneck trunk: conflicts persist all through training.
    SyntheticProblem spec;
    spec.kind = ProblemKind::kSharedFeatureRegression;
    spec.task_count = 4;
    spec.input_dim = 8;
    spec.noise_std = 0.02;
    spec.seed = 3;
    spec.batch_size = 16;
    spec.iterations_per_epoch = 25;

    TrainOptions options;
    options.epochs = 24;
    options.lr = 0.04;

    std::vector<double> sum_loss, pc_loss, wpc_loss;
    for (std::uint64_t s = 0; s < 20; ++s) {
        options.seed = 64000 + s;
        {
            auto problem = make_problem(spec);
            UniformPolicy policy(4);
            const TrainResult r = train(*problem, policy, CombineMethod::kSum, options);
            double total = 0.0;
            for (double l : r.final_per_task_loss()) total += l;
            sum_loss.push_back(total);
        }
        {
            auto problem = make_problem(spec);
            UniformPolicy policy(4);
            const TrainResult r =
                train(*problem, policy, CombineMethod::kPcgrad, options);
            double total = 0.0;
            for (double l : r.final_per_task_loss()) total += l;
            pc_loss.push_back(total);
        }
        {
            auto problem = make_problem(spec);
            DtpPolicy policy(4, 2.0);
            const TrainResult r =
                train(*problem, policy, CombineMethod::kWpcgrad, options);
            double total = 0.0;
            for (double l : r.final_per_task_loss()) total += l;
            wpc_loss.push_back(total);
        }
    }
    const MeanStats ms = mean_and_stderr(sum_loss);
    const MeanStats mp = mean_and_stderr(pc_loss);
    const MeanStats mw = mean_and_stderr(wpc_loss);

    const double gap_ps = ms.mean - mp.mean; // must be > 2 se
    const double se_ps = std::sqrt(ms.stderr_mean * ms.stderr_mean +
                                   mp.stderr_mean * mp.stderr_mean);
    const double gap_pw = mp.mean - mw.mean; // must be >= -2 se
    const double se_pw = std::sqrt(mp.stderr_mean * mp.stderr_mean +
                                   mw.stderr_mean * mw.stderr_mean);

    const bool pass = gap_ps > 2.0 * se_ps && gap_pw >= -2.0 * se_pw;
    report(8, "summed loss orders sum >= pcgrad >= weighted+dtp", pass,
           "sum=" + fmt(ms.mean) + "+/-" + fmt(ms.stderr_mean) +
               " pcgrad=" + fmt(mp.mean) + "+/-" + fmt(mp.stderr_mean) +
               " wpcgrad+dtp=" + fmt(mw.mean) + "+/-" + fmt(mw.stderr_mean) +
               " | sum-vs-pcgrad gap=" + fmt(gap_ps) + " (2se=" + fmt(2 * se_ps) +
               "), pcgrad-vs-wpcgrad gap=" + fmt(gap_pw) +
               " (2se=" + fmt(2 * se_pw) + ")");
}

// ---------------------------------------------------------------------------
// 9. Byte-identical outputs for identical configs.

void criterion_output_determinism() {
    const fs::path base = fs::temp_directory_path() / "gradsurg_acceptance";
    fs::remove_all(base);
    const fs::path dir_a = base / "a";

    const std::string config_text = R"({
        "schema_version": 1,
        "problem": {
            "kind": "conflicting_quadratics",
            "task_count": 3,
            "input_dim": 8,
            "conflict_angle_deg": 115.0,
            "noise_std": 0.05,
            "seed": 5,
            "iterations_per_epoch": 10
        },
        "method": "wpcgrad",
        "policy": {"kind": "dtp", "gamma": 2.0},
        "epochs": 4,
        "lr": 0.02,
        "seed": 11,
        "repeats": 2
    })";
    ConfigParseResult parsed = parse_config(config_text);
    if (!parsed.ok()) {
        report(9, "byte-identical outputs", false, "config failed to parse");
        return;
    }
    std::ostringstream log;
    ExperimentConfig config = *parsed.config;
    config.output_path = dir_a.string();
    const int rc_a = run_experiment(config, log);
    auto slurp = [&](const char* name) {
        std::ifstream in(dir_a / name, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };
    std::vector<std::pair<std::string, std::string>> first;
    for (const char* name : {"run_11.csv", "run_12.csv", "summary.json"}) {
        first.emplace_back(name, slurp(name));
    }
    // Rerun the identical config into the same path.
    const int rc_b = run_experiment(config, log);

    bool pass = rc_a == 0 && rc_b == 0;
    std::string detail;
    for (const auto& [name, bytes] : first) {
        if (bytes.empty() || slurp(name.c_str()) != bytes) {
            pass = false;
            detail += name + " differs; ";
        }
    }
    if (pass) {
        detail = "csv and summary bytes identical across reruns";
    }
    report(9, "byte-identical outputs", pass, detail);
}

} // namespace

int main() {
    criterion_nds_golden();
    criterion_projection_properties();
    criterion_oracle_equivalence();
    criterion_sampling_fidelity();
    criterion_dtp_values();
    criterion_gradient_check();
    criterion_prioritization_direction();
    criterion_method_ordering();
    criterion_output_determinism();

    if (g_failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criteria FAILED\n", g_failures);
    return 1;
}
