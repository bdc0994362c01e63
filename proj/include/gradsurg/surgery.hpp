#ifndef GRADSURG_SURGERY_HPP
#define GRADSURG_SURGERY_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "gradsurg/rng.hpp"
#include "gradsurg/vecmath.hpp"
#include "gradsurg/weighting.hpp"

namespace gradsurg {

/// Squared-norm floor below which a gradient is treated as zero: the
/// projection divides by the projector's squared norm, so degenerate
/// projectors are skipped instead.
inline constexpr double kProjectionEps = 1e-12;

/// Per-task flat gradients over a shared parameter space, indexed by TaskId.
/// At least two tasks; all gradients share one dimension.
class GradientSet {
public:
    explicit GradientSet(std::vector<FlatVector> gradients);

    std::size_t task_count() const { return gradients_.size(); }
    std::size_t dim() const { return gradients_.front().dim(); }
    const FlatVector& gradient(TaskId task) const { return gradients_[task]; }
    const std::vector<FlatVector>& gradients() const { return gradients_; }

private:
    std::vector<FlatVector> gradients_;
};

struct PairCosine {
    TaskId first;
    TaskId second;
    double cosine;
};

/// Result of one surgery pass. pair_cosines are measured on the original
/// (pre-surgery) gradients; a pair with a degenerate norm records cosine 0.
/// conflicts_found counts triggered conflict tests; projections_applied counts
/// projections actually taken (a degenerate projector skips). A pair can
/// conflict again after earlier modifications, so neither counter bounds the
/// other. unchanged_task is set by wpcgrad only: the first-sampled task, whose
/// output gradient equals its input bit-exactly.
struct SurgeryReport {
    FlatVector combined;
    std::size_t conflicts_found = 0;
    std::size_t projections_applied = 0;
    std::vector<PairCosine> pair_cosines;
    std::optional<TaskId> unchanged_task;
    /// Per-task gradients after surgery; combined is their ascending-order sum.
    std::vector<FlatVector> task_outputs;
};

/// Removes from `victim` its component along `projector`:
///   victim - (victim . projector / |projector|^2) projector.
/// Returns `victim` unchanged when norm_sq(projector) < eps.
FlatVector project_out(const FlatVector& victim, const FlatVector& projector,
                       double eps = kProjectionEps);

/// Projecting-conflicting-gradients pass. For each task i, a working copy
/// starts from g_i and the other tasks j are visited in a uniformly random
/// order (a fresh permutation per i, all driven by rng_seed); whenever the
/// working copy conflicts with the *original* g_j (dot < 0), the projection
/// of the working copy onto g_j is subtracted. combined is the sum of the
/// working copies in ascending task order. Deterministic given rng_seed.
SurgeryReport pcgrad(const GradientSet& grads, std::uint64_t rng_seed,
                     double eps = kProjectionEps);

/// Weighted variant. A full task ordering is drawn by weighted sampling
/// without replacement from `dist`; zero-probability tasks go last in
/// ascending order. Visiting tasks in that order, each other task j (ascending)
/// that conflicts with the current task's working gradient gets projected onto
/// it. The first-sampled task is never modified: its gradient passes through
/// bit-exactly and is reported as unchanged_task. Deterministic given rng_seed.
SurgeryReport wpcgrad(const GradientSet& grads, const TaskDistribution& dist,
                      std::uint64_t rng_seed, double eps = kProjectionEps);

/// Draws a full task ordering by weighted sampling without replacement:
/// repeatedly sample from the renormalized residual distribution; once only
/// zero-probability tasks remain they are appended in ascending TaskId order.
std::vector<TaskId> sample_task_order(const TaskDistribution& dist, Rng& rng);

} // namespace gradsurg

#endif
