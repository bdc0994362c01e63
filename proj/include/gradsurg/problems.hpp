#ifndef GRADSURG_PROBLEMS_HPP
#define GRADSURG_PROBLEMS_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "gradsurg/mlp.hpp"
#include "gradsurg/rng.hpp"
#include "gradsurg/vecmath.hpp"

namespace gradsurg {

enum class ProblemKind {
    kConflictingQuadratics,
    kSharedFeatureRegression,
    kMultilabelClassification,
};

/// Declarative description of a desk-scale synthetic multitask problem.
struct SyntheticProblem {
    ProblemKind kind = ProblemKind::kConflictingQuadratics;
    std::size_t task_count = 2;
    std::size_t input_dim = 8;
    /// Pairwise angle between initial task gradients, degrees, quadratics only.
    /// Must lie in (90, 180] and be feasible for task_count (at most
    /// arccos(-1/(task_count-1))).
    double conflict_angle_deg = 170.0;
    double noise_std = 0.0;
    std::uint64_t seed = 0;
    std::size_t batch_size = 32;
    std::size_t iterations_per_epoch = 50;

    bool operator==(const SyntheticProblem& other) const = default;
};

/// Losses and full-layout gradients for every task at one parameter snapshot.
struct TaskEval {
    std::vector<double> losses;
    std::vector<FlatVector> gradients;
};

/// Runtime face of a synthetic problem: initial parameters, per-iteration
/// task losses/gradients, and the shared/head split of the flat layout.
class MultitaskProblem {
public:
    virtual ~MultitaskProblem() = default;

    virtual std::size_t task_count() const = 0;
    virtual std::size_t param_dim() const = 0;
    /// Length of the shared prefix of the flat layout.
    virtual std::size_t shared_dim() const = 0;
    virtual FlatVector initial_params() const = 0;

    /// Draws one iteration's data with `rng` and evaluates every task at
    /// `params`. All tasks see the same snapshot and the same batch.
    virtual TaskEval evaluate(const FlatVector& params, Rng& rng) = 0;

    /// Zeroes head-parameter positions, leaving the shared prefix intact.
    virtual FlatVector mask_to_shared(const FlatVector& full) const = 0;

    virtual const SyntheticProblem& description() const = 0;

    /// The trained model, when the problem wraps one (MLP-backed kinds).
    virtual const MultitaskModel* model() const { return nullptr; }
};

/// Unit vectors with exact pairwise cosine `target_cos`, embedded in the
/// first `count` coordinates of R^dim. Feasible for
/// target_cos >= -1/(count-1); dim must be >= count.
std::vector<FlatVector> conflict_directions(std::size_t count, std::size_t dim,
                                            double target_cos);

/// Builds the runtime problem. Deterministic given spec.seed.
std::unique_ptr<MultitaskProblem> make_problem(const SyntheticProblem& spec);

/// Accessors specific to the quadratics kind, exposed for oracles and tests.
class QuadraticConflictProblem final : public MultitaskProblem {
public:
    explicit QuadraticConflictProblem(const SyntheticProblem& spec);

    std::size_t task_count() const override { return centers_.size(); }
    std::size_t param_dim() const override { return centers_.front().dim(); }
    std::size_t shared_dim() const override { return param_dim(); }
    FlatVector initial_params() const override;
    TaskEval evaluate(const FlatVector& params, Rng& rng) override;
    FlatVector mask_to_shared(const FlatVector& full) const override;
    const SyntheticProblem& description() const override { return spec_; }

    const std::vector<FlatVector>& centers() const { return centers_; }

private:
    SyntheticProblem spec_;
    std::vector<FlatVector> centers_;
};

} // namespace gradsurg

#endif
