#ifndef GRADSURG_TRAIN_HPP
#define GRADSURG_TRAIN_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gradsurg/mlp.hpp"
#include "gradsurg/problems.hpp"
#include "gradsurg/weighting.hpp"

namespace gradsurg {

enum class CombineMethod { kSum, kPcgrad, kWpcgrad };

std::string to_string(CombineMethod method);

struct TrainOptions {
    std::size_t epochs = 20;
    double lr = 0.01;
    std::uint64_t seed = 0;
    GradScope scope = GradScope::kSharedOnly;
    /// Classical momentum on the combined update; 0 disables it (0.9 typical).
    double momentum = 0.0;
    double divergence_threshold = 1e12;
};

/// Per-epoch log entry. Conflict statistics are measured every iteration on
/// the original (pre-surgery) gradients as seen by the surgery scope, then
/// averaged over the epoch.
struct MetricsRecord {
    std::size_t epoch = 0;
    std::vector<double> per_task_mean_loss;
    double conflict_fraction = 0.0;
    double mean_pairwise_cosine = 0.0;
    std::vector<double> distribution_used;
    double wallclock_seconds = 0.0;
};

struct DivergenceInfo {
    std::size_t epoch = 0;
    std::size_t iteration = 0;
    TaskId task = 0;
    double loss = 0.0;
    std::string reason;
};

struct TrainResult {
    std::vector<MetricsRecord> records;
    std::optional<DivergenceInfo> divergence;
    std::optional<FlatVector> final_params;

    bool diverged() const { return divergence.has_value(); }
    const std::vector<double>& final_per_task_loss() const {
        return records.back().per_task_mean_loss;
    }
};

/// Runs the full loop: each epoch queries the policy for the task
/// distribution, then per iteration evaluates every task at the same
/// parameter snapshot, combines the gradients with the chosen method, and
/// applies theta <- theta - lr * update. Per-iteration losses feed the policy;
/// end_epoch() advances it. Aborts with a diagnostic if any loss exceeds the
/// divergence threshold or turns non-finite. Deterministic given
/// (problem, policy, options.seed).
TrainResult train(MultitaskProblem& problem, WeightPolicy& policy,
                  CombineMethod method, const TrainOptions& options);

} // namespace gradsurg

#endif
