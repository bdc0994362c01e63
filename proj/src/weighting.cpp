#include "gradsurg/weighting.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace gradsurg {

namespace {

constexpr double kSumTolerance = 1e-9;

void require_finite_nonneg_loss(double loss, const char* op) {
    if (std::isnan(loss) || std::isinf(loss)) {
        throw std::invalid_argument(std::string(op) + ": loss must be finite");
    }
    if (loss < 0.0) {
        throw std::invalid_argument(std::string(op) + ": loss must be >= 0");
    }
}

} // namespace

TaskDistribution::TaskDistribution(std::vector<double> probs)
    : probs_(std::move(probs)) {
    if (probs_.empty()) {
        throw std::invalid_argument("TaskDistribution: needs at least one task");
    }
    double total = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0)) { // catches negatives and NaN
            throw std::invalid_argument("TaskDistribution: probabilities must be >= 0");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > kSumTolerance) {
        throw std::invalid_argument("TaskDistribution: probabilities sum to " +
                                    std::to_string(total) + ", expected 1");
    }
}

TaskDistribution TaskDistribution::uniform(std::size_t task_count) {
    if (task_count == 0) {
        throw std::invalid_argument("TaskDistribution::uniform: task_count must be >= 1");
    }
    return TaskDistribution(
        std::vector<double>(task_count, 1.0 / static_cast<double>(task_count)));
}

TaskDistribution TaskDistribution::from_weights(const std::vector<double>& weights) {
    if (weights.empty()) {
        throw std::invalid_argument("TaskDistribution::from_weights: empty weights");
    }
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) {
            throw std::invalid_argument(
                "TaskDistribution::from_weights: weights must be >= 0");
        }
        total += w;
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw std::invalid_argument(
            "TaskDistribution::from_weights: total weight must be positive and finite");
    }
    std::vector<double> probs(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        probs[i] = weights[i] / total;
    }
    return TaskDistribution(std::move(probs));
}

TaskDistribution uniform_dist(std::size_t task_count) {
    return TaskDistribution::uniform(task_count);
}

StaticSchedule::StaticSchedule(std::vector<SchedulePhase> phases)
    : phases_(std::move(phases)) {
    if (phases_.empty()) {
        throw std::invalid_argument("StaticSchedule: needs at least one phase");
    }
    if (phases_.front().start_epoch != 0) {
        throw std::invalid_argument("StaticSchedule: first phase must start at epoch 0");
    }
    const std::size_t task_count = phases_.front().dist.task_count();
    for (std::size_t i = 0; i < phases_.size(); ++i) {
        const SchedulePhase& p = phases_[i];
        if (p.end_epoch <= p.start_epoch) {
            throw std::invalid_argument("StaticSchedule: phase " + std::to_string(i) +
                                        " is empty or reversed");
        }
        if (p.dist.task_count() != task_count) {
            throw std::invalid_argument("StaticSchedule: phase " + std::to_string(i) +
                                        " has a different task count");
        }
        if (i > 0 && p.start_epoch != phases_[i - 1].end_epoch) {
            throw std::invalid_argument("StaticSchedule: phases must be contiguous (gap "
                                        "or overlap before phase " +
                                        std::to_string(i) + ")");
        }
    }
}

StaticSchedule StaticSchedule::two_favorite_phases(std::size_t task_count,
                                                   TaskId first, TaskId second,
                                                   std::size_t switch_epoch,
                                                   std::size_t uniform_epochs,
                                                   std::size_t total_epochs,
                                                   double favored_mass) {
    if (first >= task_count || second >= task_count) {
        throw std::invalid_argument("two_favorite_phases: favored task out of range");
    }
    const std::size_t uniform_end = switch_epoch + uniform_epochs;
    if (switch_epoch == 0 || uniform_end >= total_epochs) {
        throw std::invalid_argument("two_favorite_phases: phase boundaries do not fit");
    }
    std::vector<SchedulePhase> phases;
    phases.push_back({0, switch_epoch, favored_dist(task_count, first, favored_mass)});
    phases.push_back({switch_epoch, uniform_end, TaskDistribution::uniform(task_count)});
    phases.push_back(
        {uniform_end, total_epochs, favored_dist(task_count, second, favored_mass)});
    return StaticSchedule(std::move(phases));
}

const TaskDistribution& StaticSchedule::at_epoch(std::size_t epoch) const {
    for (const SchedulePhase& p : phases_) {
        if (epoch >= p.start_epoch && epoch < p.end_epoch) {
            return p.dist;
        }
    }
    throw std::out_of_range("StaticSchedule: epoch " + std::to_string(epoch) +
                            " outside covered range [0, " +
                            std::to_string(total_epochs()) + ")");
}

std::size_t StaticSchedule::total_epochs() const {
    return phases_.back().end_epoch;
}

TaskDistribution schedule_dist(const StaticSchedule& schedule, std::size_t epoch) {
    return schedule.at_epoch(epoch);
}

TaskDistribution favored_dist(std::size_t task_count, TaskId favored,
                              double favored_mass) {
    if (task_count < 2) {
        throw std::invalid_argument("favored_dist: needs at least two tasks");
    }
    if (favored >= task_count) {
        throw std::invalid_argument("favored_dist: favored task out of range");
    }
    if (!(favored_mass > 0.0 && favored_mass < 1.0)) {
        throw std::invalid_argument("favored_dist: favored_mass must be in (0, 1)");
    }
    std::vector<double> probs(task_count,
                              (1.0 - favored_mass) / static_cast<double>(task_count - 1));
    probs[favored] = favored_mass;
    return TaskDistribution::from_weights(probs);
}

DtpState::DtpState(std::size_t task_count, double gamma,
                   std::optional<std::vector<double>> scale_overrides)
    : gamma_(gamma),
      auto_scale_(!scale_overrides.has_value()),
      scales_frozen_(scale_overrides.has_value()),
      scale_factors_(task_count, 1.0),
      epoch_loss_sums_(task_count, 0.0),
      epoch_loss_counts_(task_count, 0),
      current_dist_(TaskDistribution::uniform(task_count)) {
    if (task_count == 0) {
        throw std::invalid_argument("DtpState: task_count must be >= 1");
    }
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw std::invalid_argument("DtpState: gamma must be finite and >= 0");
    }
    if (scale_overrides) {
        if (scale_overrides->size() != task_count) {
            throw std::invalid_argument("DtpState: scale_overrides length mismatch");
        }
        for (double s : *scale_overrides) {
            if (!(s > 0.0) || !std::isfinite(s)) {
                throw std::invalid_argument("DtpState: scale factors must be > 0");
            }
        }
        scale_factors_ = *scale_overrides;
    }
}

void DtpState::record(TaskId task, double loss) {
    if (task >= task_count()) {
        throw std::invalid_argument("DtpState::record: task out of range");
    }
    require_finite_nonneg_loss(loss, "DtpState::record");
    epoch_loss_sums_[task] += loss;
    epoch_loss_counts_[task] += 1;
}

TaskDistribution DtpState::update(const std::vector<double>& mean_losses) {
    if (mean_losses.size() != task_count()) {
        throw std::invalid_argument("DtpState::update: loss count mismatch");
    }
    std::vector<double> powered(mean_losses.size());
    double total = 0.0;
    for (std::size_t i = 0; i < mean_losses.size(); ++i) {
        require_finite_nonneg_loss(mean_losses[i], "DtpState::update");
        const double scaled = scale_factors_[i] * mean_losses[i];
        powered[i] = std::pow(scaled, gamma_);
        total += powered[i];
    }
    if (total > 0.0 && std::isfinite(total)) {
        std::vector<double> probs(powered.size());
        for (std::size_t i = 0; i < powered.size(); ++i) {
            probs[i] = powered[i] / total;
        }
        current_dist_ = TaskDistribution(std::move(probs));
    } else {
        // All scaled losses are zero: fall back to uniform rather than 0/0.
        current_dist_ = TaskDistribution::uniform(task_count());
    }
    return current_dist_;
}

TaskDistribution DtpState::epoch_end() {
    std::vector<double> means(task_count());
    for (std::size_t i = 0; i < task_count(); ++i) {
        if (epoch_loss_counts_[i] == 0) {
            throw std::logic_error("DtpState::epoch_end: task " + std::to_string(i) +
                                   " has no recorded losses this epoch");
        }
        means[i] = epoch_loss_sums_[i] / static_cast<double>(epoch_loss_counts_[i]);
    }
    if (auto_scale_ && !scales_frozen_) {
        // Fixed once from the first epoch's means so later scaled losses are
        // comparable in magnitude across tasks.
        for (std::size_t i = 0; i < task_count(); ++i) {
            scale_factors_[i] = means[i] > 0.0 ? 1.0 / means[i] : 1.0;
        }
        scales_frozen_ = true;
    }
    TaskDistribution result = update(means);
    std::fill(epoch_loss_sums_.begin(), epoch_loss_sums_.end(), 0.0);
    std::fill(epoch_loss_counts_.begin(), epoch_loss_counts_.end(), 0);
    return result;
}

void WeightPolicy::record_loss(TaskId, double) {}
void WeightPolicy::end_epoch() {}

UniformPolicy::UniformPolicy(std::size_t task_count)
    : dist_(TaskDistribution::uniform(task_count)) {}

TaskDistribution UniformPolicy::distribution(std::size_t) { return dist_; }

StaticSchedulePolicy::StaticSchedulePolicy(StaticSchedule schedule)
    : schedule_(std::move(schedule)) {}

TaskDistribution StaticSchedulePolicy::distribution(std::size_t epoch) {
    return schedule_.at_epoch(epoch);
}

DtpPolicy::DtpPolicy(std::size_t task_count, double gamma,
                     std::optional<std::vector<double>> scale_overrides)
    : state_(task_count, gamma, std::move(scale_overrides)) {}

TaskDistribution DtpPolicy::distribution(std::size_t) { return state_.current(); }

void DtpPolicy::record_loss(TaskId task, double loss) { state_.record(task, loss); }

void DtpPolicy::end_epoch() { state_.epoch_end(); }

} // namespace gradsurg
