#include "gradsurg/problems.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace gradsurg {

namespace {

constexpr double kPi = 3.14159265358979323846;

void validate_spec(const SyntheticProblem& spec) {
    if (spec.task_count < 2) {
        throw std::invalid_argument("SyntheticProblem: task_count must be >= 2");
    }
    if (spec.input_dim == 0) {
        throw std::invalid_argument("SyntheticProblem: input_dim must be >= 1");
    }
    if (spec.batch_size == 0 || spec.iterations_per_epoch == 0) {
        throw std::invalid_argument(
            "SyntheticProblem: batch_size and iterations_per_epoch must be >= 1");
    }
    if (!(spec.noise_std >= 0.0) || !std::isfinite(spec.noise_std)) {
        throw std::invalid_argument("SyntheticProblem: noise_std must be >= 0");
    }
    if (spec.kind == ProblemKind::kConflictingQuadratics) {
        if (!(spec.conflict_angle_deg > 90.0 && spec.conflict_angle_deg <= 180.0)) {
            throw std::invalid_argument(
                "SyntheticProblem: conflict_angle_deg must be in (90, 180]");
        }
        if (spec.input_dim < spec.task_count) {
            throw std::invalid_argument(
                "SyntheticProblem: quadratics need input_dim >= task_count");
        }
    }
}

} // namespace

std::vector<FlatVector> conflict_directions(std::size_t count, std::size_t dim,
                                            double target_cos) {
    if (count < 2 || dim < count) {
        throw std::invalid_argument("conflict_directions: need 2 <= count <= dim");
    }
    const double floor_cos = -1.0 / static_cast<double>(count - 1);
    if (target_cos < floor_cos - 1e-12) {
        throw std::invalid_argument(
            "conflict_directions: pairwise cosine " + std::to_string(target_cos) +
            " is infeasible for " + std::to_string(count) +
            " vectors (minimum is " + std::to_string(floor_cos) + ")");
    }
    // Interpolate between the regular-simplex directions (pairwise cosine
    // exactly floor_cos) and their common orthogonal axis.
    double s_sq = (target_cos - floor_cos) / (1.0 - floor_cos);
    if (s_sq < 0.0) {
        s_sq = 0.0;
    }
    const double simplex_weight = std::sqrt(1.0 - s_sq);
    const double inv_count = 1.0 / static_cast<double>(count);
    const double simplex_norm =
        std::sqrt(1.0 - inv_count); // norm of every e_k - 1/count
    const double axis_component =
        std::sqrt(s_sq) / std::sqrt(static_cast<double>(count));

    std::vector<FlatVector> dirs;
    dirs.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        std::vector<double> v(dim, 0.0);
        for (std::size_t c = 0; c < count; ++c) {
            const double simplex_c = ((c == k ? 1.0 : 0.0) - inv_count) / simplex_norm;
            v[c] = simplex_weight * simplex_c + axis_component;
        }
        dirs.push_back(FlatVector(std::move(v)));
    }
    return dirs;
}

QuadraticConflictProblem::QuadraticConflictProblem(const SyntheticProblem& spec)
    : spec_(spec) {
    validate_spec(spec);
    const double target_cos = std::cos(spec.conflict_angle_deg * kPi / 180.0);
    // Unit-radius centers; initial gradients at the origin are the negated
    // directions, which realize the same pairwise angles.
    centers_ = conflict_directions(spec.task_count, spec.input_dim, target_cos);
}

FlatVector QuadraticConflictProblem::initial_params() const {
    return FlatVector::zeros(param_dim());
}

TaskEval QuadraticConflictProblem::evaluate(const FlatVector& params, Rng& rng) {
    TaskEval eval;
    eval.losses.reserve(task_count());
    eval.gradients.reserve(task_count());
    for (const FlatVector& center : centers_) {
        FlatVector diff = axpy(-1.0, center, params); // params - center
        eval.losses.push_back(0.5 * norm_sq(diff));
        if (spec_.noise_std > 0.0) {
            for (std::size_t i = 0; i < diff.dim(); ++i) {
                diff[i] += spec_.noise_std * rng.normal();
            }
        }
        eval.gradients.push_back(std::move(diff));
    }
    return eval;
}

FlatVector QuadraticConflictProblem::mask_to_shared(const FlatVector& full) const {
    return full; // everything is shared
}

namespace {

/// MLP-backed synthetic problems. A frozen random teacher generates targets;
/// the student is a shared-trunk multitask MLP. Regression tasks read a common
/// nonlinear feature map through mutually opposed mixing directions, so the
/// trunk receives conflicting pulls; classification tasks are independent
/// random halfspace labelings.
class MlpSyntheticProblem final : public MultitaskProblem {
public:
    explicit MlpSyntheticProblem(const SyntheticProblem& spec)
        : spec_(spec),
          model_(MultitaskModel::init_random(student_spec(spec),
                                             derive_seed(spec.seed, 0x5734d647))),
          initial_params_(model_.flatten()) {
        Rng teacher_rng(derive_seed(spec.seed, 0x7eac4e12));
        const std::size_t d = spec.input_dim;
        if (spec.kind == ProblemKind::kSharedFeatureRegression) {
            feature_count_ = 2 * spec.task_count;
            const double scale = 1.0 / std::sqrt(static_cast<double>(d));
            teacher_weights_.resize(feature_count_ * d);
            for (double& w : teacher_weights_) {
                w = scale * teacher_rng.normal();
            }
            mixing_ = conflict_directions(
                spec.task_count, feature_count_,
                -1.0 / static_cast<double>(spec.task_count - 1));
        } else {
            teacher_weights_.resize(spec.task_count * d);
            for (std::size_t t = 0; t < spec.task_count; ++t) {
                double* w = teacher_weights_.data() + t * d;
                double nsq = 0.0;
                for (std::size_t i = 0; i < d; ++i) {
                    w[i] = teacher_rng.normal();
                    nsq += w[i] * w[i];
                }
                const double inv = 1.0 / std::sqrt(nsq);
                for (std::size_t i = 0; i < d; ++i) {
                    w[i] *= inv;
                }
            }
        }
    }

    std::size_t task_count() const override { return spec_.task_count; }
    std::size_t param_dim() const override { return model_.param_count(); }
    std::size_t shared_dim() const override { return model_.trunk_param_count(); }
    FlatVector initial_params() const override { return initial_params_; }

    TaskEval evaluate(const FlatVector& params, Rng& rng) override {
        model_.load_flat(params);
        const TaskBatch batch = sample_batch(rng);
        TaskEval eval;
        eval.losses.reserve(task_count());
        eval.gradients.reserve(task_count());
        for (TaskId t = 0; t < task_count(); ++t) {
            eval.losses.push_back(forward_loss(model_, batch, t));
            eval.gradients.push_back(task_gradient(model_, batch, t, GradScope::kFull));
        }
        return eval;
    }

    FlatVector mask_to_shared(const FlatVector& full) const override {
        return model_.mask_to_shared(full);
    }

    const SyntheticProblem& description() const override { return spec_; }
    const MultitaskModel* model() const override { return &model_; }

    TaskBatch sample_batch(Rng& rng) const {
        const std::size_t d = spec_.input_dim;
        const std::size_t b = spec_.batch_size;
        TaskBatch batch;
        batch.batch_size = b;
        batch.input_dim = d;
        batch.inputs.resize(b * d);
        for (double& x : batch.inputs) {
            x = rng.normal();
        }
        batch.targets.resize(spec_.task_count);
        if (spec_.kind == ProblemKind::kSharedFeatureRegression) {
            // phi(x) = tanh(Vx); y_t = mixing_t . phi(x) + noise
            std::vector<double> phi(feature_count_);
            for (TaskId t = 0; t < spec_.task_count; ++t) {
                batch.targets[t].resize(b);
            }
            for (std::size_t row = 0; row < b; ++row) {
                const double* x = batch.inputs.data() + row * d;
                for (std::size_t f = 0; f < feature_count_; ++f) {
                    const double* w = teacher_weights_.data() + f * d;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < d; ++i) {
                        acc += w[i] * x[i];
                    }
                    phi[f] = std::tanh(acc);
                }
                for (TaskId t = 0; t < spec_.task_count; ++t) {
                    double y = 0.0;
                    for (std::size_t f = 0; f < feature_count_; ++f) {
                        y += mixing_[t][f] * phi[f];
                    }
                    if (spec_.noise_std > 0.0) {
                        y += spec_.noise_std * rng.normal();
                    }
                    batch.targets[t][row] = y;
                }
            }
        } else {
            // One-hot halfspace labels; noise_std acts as a flip probability.
            const double flip_prob = std::min(spec_.noise_std, 0.5);
            for (TaskId t = 0; t < spec_.task_count; ++t) {
                batch.targets[t].assign(b * 2, 0.0);
                const double* w = teacher_weights_.data() + t * d;
                for (std::size_t row = 0; row < b; ++row) {
                    const double* x = batch.inputs.data() + row * d;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < d; ++i) {
                        acc += w[i] * x[i];
                    }
                    bool positive = acc > 0.0;
                    if (flip_prob > 0.0 && rng.uniform() < flip_prob) {
                        positive = !positive;
                    }
                    batch.targets[t][row * 2 + (positive ? 1 : 0)] = 1.0;
                }
            }
        }
        return batch;
    }

private:
    static ModelSpec student_spec(const SyntheticProblem& spec) {
        ModelSpec ms;
        ms.input_dim = spec.input_dim;
        // The teacher mixes 2*task_count features into targets spanning
        // task_count-1 dimensions; a trunk just below that capacity keeps
        // the tasks in lasting competition for shared representation.
        ms.trunk_widths = {std::max<std::size_t>(spec.task_count - 1, 2)};
        ModelSpec::HeadSpec head;
        if (spec.kind == ProblemKind::kSharedFeatureRegression) {
            head.output_dim = 1;
            head.loss = LossKind::kMeanSquaredError;
        } else {
            head.output_dim = 2;
            head.loss = LossKind::kCrossEntropy;
        }
        ms.heads.assign(spec.task_count, head);
        return ms;
    }

    SyntheticProblem spec_;
    MultitaskModel model_;
    FlatVector initial_params_;
    std::size_t feature_count_ = 0;
    std::vector<double> teacher_weights_;
    std::vector<FlatVector> mixing_;
};

} // namespace

std::unique_ptr<MultitaskProblem> make_problem(const SyntheticProblem& spec) {
    validate_spec(spec);
    switch (spec.kind) {
        case ProblemKind::kConflictingQuadratics:
            return std::make_unique<QuadraticConflictProblem>(spec);
        case ProblemKind::kSharedFeatureRegression:
        case ProblemKind::kMultilabelClassification:
            return std::make_unique<MlpSyntheticProblem>(spec);
    }
    throw std::invalid_argument("make_problem: unknown problem kind");
}

} // namespace gradsurg
