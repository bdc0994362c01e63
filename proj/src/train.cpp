#include "gradsurg/train.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "gradsurg/metrics.hpp"
#include "gradsurg/rng.hpp"
#include "gradsurg/surgery.hpp"

namespace gradsurg {

std::string to_string(CombineMethod method) {
    switch (method) {
        case CombineMethod::kSum: return "sum";
        case CombineMethod::kPcgrad: return "pcgrad";
        case CombineMethod::kWpcgrad: return "wpcgrad";
    }
    return "unknown";
}

namespace {

// Stream labels for deriving independent per-run RNG streams.
constexpr std::uint64_t kDataStream = 0x64617461;    // batch draws and noise
constexpr std::uint64_t kSurgeryStream = 0x73757267; // per-iteration surgery seeds

FlatVector sum_of(const std::vector<FlatVector>& grads) {
    FlatVector acc = grads.front();
    for (std::size_t k = 1; k < grads.size(); ++k) {
        acc = axpy(1.0, grads[k], acc);
    }
    return acc;
}

} // namespace

TrainResult train(MultitaskProblem& problem, WeightPolicy& policy,
                  CombineMethod method, const TrainOptions& options) {
    if (options.epochs == 0) {
        throw std::invalid_argument("train: epochs must be >= 1");
    }
    if (!(options.lr > 0.0) || !std::isfinite(options.lr)) {
        throw std::invalid_argument("train: lr must be positive and finite");
    }
    if (!(options.momentum >= 0.0 && options.momentum < 1.0)) {
        throw std::invalid_argument("train: momentum must be in [0, 1)");
    }

    const std::size_t tasks = problem.task_count();
    const std::size_t iterations = problem.description().iterations_per_epoch;
    const bool shared_only = options.scope == GradScope::kSharedOnly;

    Rng data_rng(derive_seed(options.seed, kDataStream));
    FlatVector params = problem.initial_params();
    FlatVector velocity = FlatVector::zeros(params.dim());

    TrainResult result;
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        const TaskDistribution dist = policy.distribution(epoch);

        std::vector<double> loss_sums(tasks, 0.0);
        double conflict_sum = 0.0;
        double cosine_sum = 0.0;

        for (std::size_t iter = 0; iter < iterations; ++iter) {
            TaskEval eval = problem.evaluate(params, data_rng);

            for (TaskId t = 0; t < tasks; ++t) {
                const double loss = eval.losses[t];
                if (!std::isfinite(loss) || loss > options.divergence_threshold) {
                    result.divergence = DivergenceInfo{
                        epoch, iter, t, loss,
                        std::isfinite(loss) ? "loss exceeded divergence threshold"
                                            : "non-finite loss"};
                    MetricsRecord diag;
                    diag.epoch = epoch;
                    diag.per_task_mean_loss = eval.losses;
                    for (double& l : diag.per_task_mean_loss) {
                        if (!std::isfinite(l)) {
                            l = options.divergence_threshold;
                        }
                    }
                    diag.conflict_fraction =
                        iter > 0 ? conflict_sum / static_cast<double>(iter) : 0.0;
                    diag.mean_pairwise_cosine =
                        iter > 0 ? cosine_sum / static_cast<double>(iter) : 0.0;
                    diag.distribution_used = dist.probs();
                    result.records.push_back(std::move(diag));
                    return result;
                }
                loss_sums[t] += loss;
                policy.record_loss(t, loss);
            }

            // Surgery operates on the scope-masked gradients; head gradients
            // live on disjoint coordinates and pass through unmodified.
            std::vector<FlatVector> surgery_input;
            surgery_input.reserve(tasks);
            for (TaskId t = 0; t < tasks; ++t) {
                surgery_input.push_back(shared_only
                                            ? problem.mask_to_shared(eval.gradients[t])
                                            : eval.gradients[t]);
            }
            const GradientSet grad_set(std::move(surgery_input));

            const ConflictStats stats = conflict_stats(grad_set);
            conflict_sum += stats.conflict_fraction;
            cosine_sum += stats.mean_pairwise_cosine;

            FlatVector update = [&] {
                switch (method) {
                    case CombineMethod::kSum:
                        return sum_of(eval.gradients);
                    case CombineMethod::kPcgrad: {
                        const std::uint64_t s =
                            derive_seed(options.seed ^ kSurgeryStream, epoch, iter);
                        SurgeryReport rep = pcgrad(grad_set, s);
                        return std::move(rep.combined);
                    }
                    case CombineMethod::kWpcgrad: {
                        const std::uint64_t s =
                            derive_seed(options.seed ^ kSurgeryStream, epoch, iter);
                        SurgeryReport rep = wpcgrad(grad_set, dist, s);
                        return std::move(rep.combined);
                    }
                }
                throw std::logic_error("train: unknown combine method");
            }();

            if (shared_only && method != CombineMethod::kSum) {
                // Re-attach the untouched head gradients.
                for (TaskId t = 0; t < tasks; ++t) {
                    FlatVector heads =
                        axpy(-1.0, problem.mask_to_shared(eval.gradients[t]),
                             eval.gradients[t]);
                    update = axpy(1.0, heads, update);
                }
            }

            if (options.momentum > 0.0) {
                velocity = axpy(options.momentum, velocity, update);
                params = axpy(-options.lr, velocity, params);
            } else {
                params = axpy(-options.lr, update, params);
            }
        }

        policy.end_epoch();

        const auto epoch_end = std::chrono::steady_clock::now();
        MetricsRecord record;
        record.epoch = epoch;
        record.per_task_mean_loss.resize(tasks);
        for (TaskId t = 0; t < tasks; ++t) {
            record.per_task_mean_loss[t] =
                loss_sums[t] / static_cast<double>(iterations);
        }
        record.conflict_fraction = conflict_sum / static_cast<double>(iterations);
        record.mean_pairwise_cosine = cosine_sum / static_cast<double>(iterations);
        record.distribution_used = dist.probs();
        record.wallclock_seconds =
            std::chrono::duration<double>(epoch_end - epoch_start).count();
        result.records.push_back(std::move(record));
    }

    result.final_params = std::move(params);
    return result;
}

} // namespace gradsurg
