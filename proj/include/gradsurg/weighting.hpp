#ifndef GRADSURG_WEIGHTING_HPP
#define GRADSURG_WEIGHTING_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace gradsurg {

using TaskId = std::size_t;

/// Normalized sampling probabilities over tasks: each entry >= 0 and the
/// total equals 1 within 1e-9. Immutable once built.
class TaskDistribution {
public:
    explicit TaskDistribution(std::vector<double> probs);

    static TaskDistribution uniform(std::size_t task_count);

    /// Normalizes non-negative weights; total weight must be positive.
    static TaskDistribution from_weights(const std::vector<double>& weights);

    std::size_t task_count() const { return probs_.size(); }
    double prob(TaskId task) const { return probs_[task]; }
    const std::vector<double>& probs() const { return probs_; }

    bool operator==(const TaskDistribution& other) const = default;

private:
    std::vector<double> probs_;
};

/// All tasks equally likely. task_count must be >= 1.
TaskDistribution uniform_dist(std::size_t task_count);

/// One phase of a hand-crafted prioritization schedule:
/// [start_epoch, end_epoch) uses `dist`.
struct SchedulePhase {
    std::size_t start_epoch;
    std::size_t end_epoch;
    TaskDistribution dist;
};

/// Piecewise-constant schedule of task distributions. Phases must be
/// contiguous, non-overlapping, and start at epoch 0.
class StaticSchedule {
public:
    explicit StaticSchedule(std::vector<SchedulePhase> phases);

    /// Builds the common three-phase shape: favor task `first` until
    /// `switch_epoch`, sample uniformly for `uniform_epochs`, then favor
    /// task `second` until `total_epochs`. The favored task receives
    /// `favored_mass` probability; the remainder is split evenly.
    static StaticSchedule two_favorite_phases(std::size_t task_count,
                                              TaskId first, TaskId second,
                                              std::size_t switch_epoch,
                                              std::size_t uniform_epochs,
                                              std::size_t total_epochs,
                                              double favored_mass = 0.91);

    const TaskDistribution& at_epoch(std::size_t epoch) const;
    std::size_t total_epochs() const;
    const std::vector<SchedulePhase>& phases() const { return phases_; }

private:
    std::vector<SchedulePhase> phases_;
};

/// Distribution of the phase containing `epoch`; error outside coverage.
TaskDistribution schedule_dist(const StaticSchedule& schedule, std::size_t epoch);

/// Builds a distribution that puts `favored_mass` on one task and splits the
/// rest evenly across the others.
TaskDistribution favored_dist(std::size_t task_count, TaskId favored,
                              double favored_mass = 0.91);

/// Dynamic Task Prioritization accumulator. Per-iteration losses are recorded
/// with record(); epoch_end() turns the epoch means into sampling
/// probabilities p_i = s_i^gamma / sum_j s_j^gamma over scaled losses
/// s_i = scale_i * mean_loss_i, then resets the accumulators.
///
/// Scale factors: if no overrides are given they are set once, at the first
/// epoch_end(), to the reciprocal of each task's epoch-0 mean loss and then
/// frozen. The distribution starts uniform and stays uniform until the first
/// epoch_end().
///
/// Single-owner mutable state: record/epoch_end must be externally serialized.
class DtpState {
public:
    DtpState(std::size_t task_count, double gamma,
             std::optional<std::vector<double>> scale_overrides = std::nullopt);

    void record(TaskId task, double loss);

    /// Applies the prioritization rule to explicit per-task epoch mean losses
    /// and updates the current distribution.
    TaskDistribution update(const std::vector<double>& mean_losses);

    /// Computes epoch means from the recorded losses (every task needs at
    /// least one record), fixes auto scale factors on the first call,
    /// delegates to update(), and resets the accumulators.
    TaskDistribution epoch_end();

    const TaskDistribution& current() const { return current_dist_; }
    double gamma() const { return gamma_; }
    const std::vector<double>& scale_factors() const { return scale_factors_; }
    std::size_t task_count() const { return scale_factors_.size(); }

private:
    double gamma_;
    bool auto_scale_;
    bool scales_frozen_;
    std::vector<double> scale_factors_;
    std::vector<double> epoch_loss_sums_;
    std::vector<std::size_t> epoch_loss_counts_;
    TaskDistribution current_dist_;
};

/// Produces the task sampling distribution for each epoch. DTP-style policies
/// consume per-iteration losses; the others ignore them.
class WeightPolicy {
public:
    virtual ~WeightPolicy() = default;
    virtual TaskDistribution distribution(std::size_t epoch) = 0;
    virtual void record_loss(TaskId task, double loss);
    virtual void end_epoch();
    virtual std::string name() const = 0;
};

class UniformPolicy final : public WeightPolicy {
public:
    explicit UniformPolicy(std::size_t task_count);
    TaskDistribution distribution(std::size_t epoch) override;
    std::string name() const override { return "uniform"; }

private:
    TaskDistribution dist_;
};

class StaticSchedulePolicy final : public WeightPolicy {
public:
    explicit StaticSchedulePolicy(StaticSchedule schedule);
    TaskDistribution distribution(std::size_t epoch) override;
    std::string name() const override { return "static"; }

private:
    StaticSchedule schedule_;
};

class DtpPolicy final : public WeightPolicy {
public:
    DtpPolicy(std::size_t task_count, double gamma,
              std::optional<std::vector<double>> scale_overrides = std::nullopt);
    TaskDistribution distribution(std::size_t epoch) override;
    void record_loss(TaskId task, double loss) override;
    void end_epoch() override;
    std::string name() const override { return "dtp"; }
    const DtpState& state() const { return state_; }

private:
    DtpState state_;
};

} // namespace gradsurg

#endif
