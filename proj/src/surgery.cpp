#include "gradsurg/surgery.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace gradsurg {

namespace {

double raw_dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

/// In-place projection of `victim` away from `projector`. Returns whether the
/// projection was applied (skipped when the projector is degenerate).
bool project_out_inplace(std::vector<double>& victim,
                         const std::vector<double>& projector, double eps) {
    const double denom = raw_dot(projector, projector);
    if (denom < eps) {
        return false;
    }
    const double coeff = raw_dot(victim, projector) / denom;
    for (std::size_t i = 0; i < victim.size(); ++i) {
        victim[i] -= coeff * projector[i];
    }
    return true;
}

std::vector<PairCosine> original_pair_cosines(const GradientSet& grads, double eps) {
    std::vector<PairCosine> out;
    const std::size_t k = grads.task_count();
    out.reserve(k * (k - 1) / 2);
    for (TaskId i = 0; i < k; ++i) {
        for (TaskId j = i + 1; j < k; ++j) {
            const double ni = norm_sq(grads.gradient(i));
            const double nj = norm_sq(grads.gradient(j));
            double cosine = 0.0;
            if (ni >= eps && nj >= eps) {
                cosine = dot(grads.gradient(i), grads.gradient(j)) / std::sqrt(ni * nj);
            }
            out.push_back({i, j, cosine});
        }
    }
    return out;
}

FlatVector sum_working(const std::vector<std::vector<double>>& working) {
    std::vector<double> acc(working.front().size(), 0.0);
    for (const std::vector<double>& g : working) {
        for (std::size_t i = 0; i < acc.size(); ++i) {
            acc[i] += g[i];
        }
    }
    return FlatVector(std::move(acc));
}

void require_eps(double eps) {
    if (!(eps > 0.0)) {
        throw std::invalid_argument("surgery: eps must be > 0");
    }
}

} // namespace

GradientSet::GradientSet(std::vector<FlatVector> gradients)
    : gradients_(std::move(gradients)) {
    if (gradients_.size() < 2) {
        throw std::invalid_argument("GradientSet: needs at least two tasks");
    }
    const std::size_t d = gradients_.front().dim();
    for (std::size_t k = 1; k < gradients_.size(); ++k) {
        if (gradients_[k].dim() != d) {
            throw std::invalid_argument("GradientSet: gradient " + std::to_string(k) +
                                        " has dim " + std::to_string(gradients_[k].dim()) +
                                        ", expected " + std::to_string(d));
        }
    }
}

FlatVector project_out(const FlatVector& victim, const FlatVector& projector,
                       double eps) {
    require_eps(eps);
    if (victim.dim() != projector.dim()) {
        throw std::invalid_argument("project_out: dimension mismatch");
    }
    std::vector<double> work = victim.values();
    project_out_inplace(work, projector.values(), eps);
    return FlatVector(std::move(work));
}

SurgeryReport pcgrad(const GradientSet& grads, std::uint64_t rng_seed, double eps) {
    require_eps(eps);
    const std::size_t k = grads.task_count();

    Rng rng(rng_seed);
    std::vector<std::vector<double>> working;
    working.reserve(k);
    for (TaskId t = 0; t < k; ++t) {
        working.push_back(grads.gradient(t).values());
    }

    SurgeryReport report{FlatVector::zeros(grads.dim()), 0, 0, {}, std::nullopt, {}};
    report.pair_cosines = original_pair_cosines(grads, eps);

    for (TaskId i = 0; i < k; ++i) {
        std::vector<TaskId> others;
        others.reserve(k - 1);
        for (TaskId j = 0; j < k; ++j) {
            if (j != i) {
                others.push_back(j);
            }
        }
        rng.shuffle(others);
        for (TaskId j : others) {
            const std::vector<double>& original_j = grads.gradient(j).values();
            if (raw_dot(working[i], original_j) < 0.0) {
                ++report.conflicts_found;
                if (project_out_inplace(working[i], original_j, eps)) {
                    ++report.projections_applied;
                }
            }
        }
    }

    report.combined = sum_working(working);
    report.task_outputs.reserve(k);
    for (std::vector<double>& g : working) {
        report.task_outputs.push_back(FlatVector(std::move(g)));
    }
    return report;
}

std::vector<TaskId> sample_task_order(const TaskDistribution& dist, Rng& rng) {
    const std::size_t k = dist.task_count();
    std::vector<TaskId> order;
    order.reserve(k);
    std::vector<bool> taken(k, false);

    for (std::size_t round = 0; round < k; ++round) {
        double residual = 0.0;
        for (TaskId t = 0; t < k; ++t) {
            if (!taken[t] && dist.prob(t) > 0.0) {
                residual += dist.prob(t);
            }
        }
        if (residual <= 0.0) {
            // Only zero-probability tasks remain: deterministic ascending tail.
            for (TaskId t = 0; t < k; ++t) {
                if (!taken[t]) {
                    order.push_back(t);
                }
            }
            break;
        }
        const double u = rng.uniform() * residual;
        double cum = 0.0;
        TaskId picked = k; // sentinel
        TaskId last_positive = k;
        for (TaskId t = 0; t < k; ++t) {
            if (taken[t] || dist.prob(t) <= 0.0) {
                continue;
            }
            last_positive = t;
            cum += dist.prob(t);
            if (u < cum) {
                picked = t;
                break;
            }
        }
        if (picked == k) {
            picked = last_positive; // guards against rounding at the far edge
        }
        taken[picked] = true;
        order.push_back(picked);
    }
    return order;
}

SurgeryReport wpcgrad(const GradientSet& grads, const TaskDistribution& dist,
                      std::uint64_t rng_seed, double eps) {
    require_eps(eps);
    const std::size_t k = grads.task_count();
    if (dist.task_count() != k) {
        throw std::invalid_argument("wpcgrad: distribution covers " +
                                    std::to_string(dist.task_count()) +
                                    " tasks, gradients cover " + std::to_string(k));
    }

    Rng rng(rng_seed);
    const std::vector<TaskId> order = sample_task_order(dist, rng);
    const TaskId kept = order.front();

    std::vector<std::vector<double>> working;
    working.reserve(k);
    for (TaskId t = 0; t < k; ++t) {
        working.push_back(grads.gradient(t).values());
    }

    SurgeryReport report{FlatVector::zeros(grads.dim()), 0, 0, {}, std::nullopt, {}};
    report.pair_cosines = original_pair_cosines(grads, eps);
    report.unchanged_task = kept;

    for (TaskId i : order) {
        for (TaskId j = 0; j < k; ++j) {
            if (j == i || j == kept) {
                // The first-sampled task's gradient stays fully intact; in
                // exact arithmetic it can never re-enter a conflict after its
                // own pass, so only rounding noise is being excluded here.
                continue;
            }
            if (raw_dot(working[i], working[j]) < 0.0) {
                ++report.conflicts_found;
                if (project_out_inplace(working[j], working[i], eps)) {
                    ++report.projections_applied;
                }
            }
        }
    }

    report.combined = sum_working(working);
    report.task_outputs.reserve(k);
    for (std::vector<double>& g : working) {
        report.task_outputs.push_back(FlatVector(std::move(g)));
    }
    return report;
}

} // namespace gradsurg
