#ifndef GRADSURG_MLP_HPP
#define GRADSURG_MLP_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gradsurg/vecmath.hpp"
#include "gradsurg/weighting.hpp"

namespace gradsurg {

enum class LossKind { kMeanSquaredError, kCrossEntropy };

enum class GradScope { kSharedOnly, kFull };

/// Dense layer, weights stored row-major as [out][in].
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;
    std::vector<double> biases;

    std::size_t param_count() const { return weights.size() + biases.size(); }
};

/// Shape description for a shared-trunk / per-task-head MLP.
struct ModelSpec {
    std::size_t input_dim = 0;
    /// Hidden widths of the shared trunk, e.g. {16, 8}. May be empty.
    std::vector<std::size_t> trunk_widths;
    struct HeadSpec {
        /// Hidden widths inside the head (usually empty).
        std::vector<std::size_t> hidden_widths;
        std::size_t output_dim = 1;
        LossKind loss = LossKind::kMeanSquaredError;
    };
    std::vector<HeadSpec> heads;
};

/// One mini-batch: a shared input matrix plus one target matrix per task.
/// All matrices are row-major with batch_size rows.
struct TaskBatch {
    std::size_t batch_size = 0;
    std::size_t input_dim = 0;
    std::vector<double> inputs;                 // batch_size x input_dim
    std::vector<std::vector<double>> targets;   // per task, batch_size x target_dim
};

/// Shared-trunk multilayer perceptron with one head per task. Trunk and head
/// hidden layers use tanh; each head's final layer is linear. Parameters
/// flatten canonically: trunk layers first, then heads by TaskId, each layer
/// contributing row-major weights followed by biases.
class MultitaskModel {
public:
    /// Glorot-uniform initialization (+/- sqrt(6/(fan_in+fan_out))), seeded.
    static MultitaskModel init_random(const ModelSpec& spec, std::uint64_t seed);

    /// All-zero parameters, mainly for tests.
    static MultitaskModel init_zero(const ModelSpec& spec);

    std::size_t task_count() const { return heads_.size(); }
    std::size_t input_dim() const { return spec_.input_dim; }
    std::size_t output_dim(TaskId task) const;
    LossKind loss_kind(TaskId task) const { return spec_.heads[task].loss; }

    std::size_t param_count() const { return param_count_; }
    /// Length of the shared-trunk prefix of the flat layout.
    std::size_t trunk_param_count() const { return trunk_param_count_; }

    /// Canonical flattening; flatten/load_flat round-trip bit-exactly.
    FlatVector flatten() const;
    void load_flat(const FlatVector& params);

    const std::vector<DenseLayer>& trunk() const { return trunk_; }
    const std::vector<DenseLayer>& head(TaskId task) const { return heads_[task]; }
    const ModelSpec& spec() const { return spec_; }

    /// Zeroes every head-parameter position of a full-layout vector,
    /// leaving the trunk prefix intact.
    FlatVector mask_to_shared(const FlatVector& full) const;

private:
    explicit MultitaskModel(const ModelSpec& spec);

    ModelSpec spec_;
    std::vector<DenseLayer> trunk_;
    std::vector<std::vector<DenseLayer>> heads_;
    std::size_t param_count_ = 0;
    std::size_t trunk_param_count_ = 0;
};

/// Mean loss of one task over a batch: mean squared error averaged over all
/// output elements, or softmax cross-entropy averaged over rows. Throws with
/// the offending layer identified if the forward pass produces non-finite
/// values.
double forward_loss(const MultitaskModel& model, const TaskBatch& batch, TaskId task);

/// Reverse-mode gradient of forward_loss with respect to all parameters, in
/// the canonical flat layout. With GradScope::kSharedOnly every head position
/// is exactly zero.
FlatVector task_gradient(const MultitaskModel& model, const TaskBatch& batch,
                         TaskId task, GradScope scope = GradScope::kFull);

/// theta <- theta - lr * update.
void apply_update(MultitaskModel& model, const FlatVector& update, double lr);

/// Central-difference gradient, an independent oracle for task_gradient.
FlatVector finite_diff_gradient(const MultitaskModel& model, const TaskBatch& batch,
                                TaskId task, double step);

} // namespace gradsurg

#endif
