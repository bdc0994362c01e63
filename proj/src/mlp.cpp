#include "gradsurg/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "gradsurg/rng.hpp"

namespace gradsurg {

namespace {

void require_valid_spec(const ModelSpec& spec) {
    if (spec.input_dim == 0) {
        throw std::invalid_argument("ModelSpec: input_dim must be >= 1");
    }
    if (spec.heads.empty()) {
        throw std::invalid_argument("ModelSpec: needs at least one head");
    }
    for (std::size_t w : spec.trunk_widths) {
        if (w == 0) {
            throw std::invalid_argument("ModelSpec: trunk widths must be >= 1");
        }
    }
    for (const ModelSpec::HeadSpec& h : spec.heads) {
        if (h.output_dim == 0) {
            throw std::invalid_argument("ModelSpec: head output_dim must be >= 1");
        }
        for (std::size_t w : h.hidden_widths) {
            if (w == 0) {
                throw std::invalid_argument("ModelSpec: head widths must be >= 1");
            }
        }
        if (h.loss == LossKind::kCrossEntropy && h.output_dim < 2) {
            throw std::invalid_argument(
                "ModelSpec: cross-entropy heads need output_dim >= 2");
        }
    }
}

DenseLayer make_layer(std::size_t in, std::size_t out) {
    DenseLayer layer;
    layer.in = in;
    layer.out = out;
    layer.weights.assign(in * out, 0.0);
    layer.biases.assign(out, 0.0);
    return layer;
}

void check_batch(const MultitaskModel& model, const TaskBatch& batch, TaskId task) {
    if (task >= model.task_count()) {
        throw std::invalid_argument("task id " + std::to_string(task) + " out of range");
    }
    if (batch.batch_size == 0) {
        throw std::invalid_argument("TaskBatch: batch_size must be >= 1");
    }
    if (batch.input_dim != model.input_dim()) {
        throw std::invalid_argument("TaskBatch: input_dim mismatch");
    }
    if (batch.inputs.size() != batch.batch_size * batch.input_dim) {
        throw std::invalid_argument("TaskBatch: inputs shape mismatch");
    }
    if (batch.targets.size() != model.task_count()) {
        throw std::invalid_argument("TaskBatch: one target matrix per task required");
    }
    if (batch.targets[task].size() != batch.batch_size * model.output_dim(task)) {
        throw std::invalid_argument("TaskBatch: target shape mismatch for task " +
                                    std::to_string(task));
    }
}

void require_finite(const std::vector<double>& values, const std::string& where) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw std::runtime_error("forward pass produced a non-finite value in " +
                                     where);
        }
    }
}

/// y = tanh(Wx + b) applied row-wise over the batch; `linear` skips the tanh.
std::vector<double> layer_forward(const DenseLayer& layer,
                                  const std::vector<double>& input,
                                  std::size_t batch, bool linear) {
    std::vector<double> out(batch * layer.out);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* x = input.data() + b * layer.in;
        double* y = out.data() + b * layer.out;
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double* w = layer.weights.data() + o * layer.in;
            double acc = layer.biases[o];
            for (std::size_t i = 0; i < layer.in; ++i) {
                acc += w[i] * x[i];
            }
            y[o] = linear ? acc : std::tanh(acc);
        }
    }
    return out;
}

struct ForwardCache {
    // acts[0] is the layer input; acts[l+1] the post-activation of layer l.
    std::vector<std::vector<double>> trunk_acts;
    std::vector<std::vector<double>> head_acts;
};

ForwardCache run_forward(const MultitaskModel& model, const TaskBatch& batch,
                         TaskId task) {
    ForwardCache cache;
    cache.trunk_acts.push_back(batch.inputs);
    for (std::size_t l = 0; l < model.trunk().size(); ++l) {
        cache.trunk_acts.push_back(layer_forward(model.trunk()[l],
                                                 cache.trunk_acts.back(),
                                                 batch.batch_size, false));
        require_finite(cache.trunk_acts.back(), "trunk layer " + std::to_string(l));
    }
    const std::vector<DenseLayer>& head = model.head(task);
    cache.head_acts.push_back(cache.trunk_acts.back());
    for (std::size_t l = 0; l < head.size(); ++l) {
        const bool is_output = (l + 1 == head.size());
        cache.head_acts.push_back(layer_forward(head[l], cache.head_acts.back(),
                                                batch.batch_size, is_output));
        require_finite(cache.head_acts.back(), "task " + std::to_string(task) +
                                                   " head layer " + std::to_string(l));
    }
    return cache;
}

double loss_from_outputs(LossKind kind, const std::vector<double>& outputs,
                         const std::vector<double>& targets, std::size_t batch,
                         std::size_t out_dim) {
    if (kind == LossKind::kMeanSquaredError) {
        double acc = 0.0;
        for (std::size_t i = 0; i < outputs.size(); ++i) {
            const double d = outputs[i] - targets[i];
            acc += d * d;
        }
        return acc / static_cast<double>(outputs.size());
    }
    // Softmax cross-entropy, mean over rows; targets are per-row distributions.
    double acc = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const double* z = outputs.data() + b * out_dim;
        const double* t = targets.data() + b * out_dim;
        double zmax = z[0];
        for (std::size_t c = 1; c < out_dim; ++c) {
            zmax = std::max(zmax, z[c]);
        }
        double sum_exp = 0.0;
        for (std::size_t c = 0; c < out_dim; ++c) {
            sum_exp += std::exp(z[c] - zmax);
        }
        const double log_sum = std::log(sum_exp) + zmax;
        for (std::size_t c = 0; c < out_dim; ++c) {
            if (t[c] != 0.0) {
                acc -= t[c] * (z[c] - log_sum);
            }
        }
    }
    return acc / static_cast<double>(batch);
}

/// dL/d(outputs) for the configured loss.
std::vector<double> loss_gradient(LossKind kind, const std::vector<double>& outputs,
                                  const std::vector<double>& targets,
                                  std::size_t batch, std::size_t out_dim) {
    std::vector<double> delta(outputs.size());
    if (kind == LossKind::kMeanSquaredError) {
        const double scale = 2.0 / static_cast<double>(outputs.size());
        for (std::size_t i = 0; i < outputs.size(); ++i) {
            delta[i] = scale * (outputs[i] - targets[i]);
        }
        return delta;
    }
    const double scale = 1.0 / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* z = outputs.data() + b * out_dim;
        const double* t = targets.data() + b * out_dim;
        double* d = delta.data() + b * out_dim;
        double zmax = z[0];
        for (std::size_t c = 1; c < out_dim; ++c) {
            zmax = std::max(zmax, z[c]);
        }
        double sum_exp = 0.0;
        for (std::size_t c = 0; c < out_dim; ++c) {
            sum_exp += std::exp(z[c] - zmax);
        }
        for (std::size_t c = 0; c < out_dim; ++c) {
            const double p = std::exp(z[c] - zmax) / sum_exp;
            d[c] = scale * (p - t[c]);
        }
    }
    return delta;
}

/// Backward through one layer. `delta` is dL/d(pre-activation output) of size
/// batch x out. Writes weight/bias grads and returns dL/d(input).
std::vector<double> layer_backward(const DenseLayer& layer,
                                   const std::vector<double>& input,
                                   const std::vector<double>& delta,
                                   std::size_t batch, double* weight_grad,
                                   double* bias_grad) {
    std::vector<double> dinput(batch * layer.in, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* x = input.data() + b * layer.in;
        const double* d = delta.data() + b * layer.out;
        double* dx = dinput.data() + b * layer.in;
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double* w = layer.weights.data() + o * layer.in;
            double* wg = weight_grad + o * layer.in;
            bias_grad[o] += d[o];
            for (std::size_t i = 0; i < layer.in; ++i) {
                wg[i] += d[o] * x[i];
                dx[i] += d[o] * w[i];
            }
        }
    }
    return dinput;
}

/// Converts dL/d(post-activation) into dL/d(pre-activation) for tanh layers.
void apply_tanh_backward(std::vector<double>& delta,
                         const std::vector<double>& activations) {
    for (std::size_t i = 0; i < delta.size(); ++i) {
        delta[i] *= 1.0 - activations[i] * activations[i];
    }
}

} // namespace

MultitaskModel::MultitaskModel(const ModelSpec& spec) : spec_(spec) {
    require_valid_spec(spec);
    std::size_t width = spec.input_dim;
    for (std::size_t w : spec.trunk_widths) {
        trunk_.push_back(make_layer(width, w));
        width = w;
    }
    const std::size_t trunk_out = width;
    for (const ModelSpec::HeadSpec& h : spec.heads) {
        std::vector<DenseLayer> head;
        std::size_t hw = trunk_out;
        for (std::size_t w : h.hidden_widths) {
            head.push_back(make_layer(hw, w));
            hw = w;
        }
        head.push_back(make_layer(hw, h.output_dim));
        heads_.push_back(std::move(head));
    }
    for (const DenseLayer& l : trunk_) {
        trunk_param_count_ += l.param_count();
    }
    param_count_ = trunk_param_count_;
    for (const std::vector<DenseLayer>& head : heads_) {
        for (const DenseLayer& l : head) {
            param_count_ += l.param_count();
        }
    }
    if (param_count_ == 0) {
        throw std::invalid_argument("MultitaskModel: no parameters");
    }
}

MultitaskModel MultitaskModel::init_zero(const ModelSpec& spec) {
    return MultitaskModel(spec);
}

MultitaskModel MultitaskModel::init_random(const ModelSpec& spec, std::uint64_t seed) {
    MultitaskModel model(spec);
    Rng rng(seed);
    auto glorot = [&rng](DenseLayer& layer) {
        const double limit =
            std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
        for (double& w : layer.weights) {
            w = (2.0 * rng.uniform() - 1.0) * limit;
        }
        // Biases start at zero.
    };
    for (DenseLayer& l : model.trunk_) {
        glorot(l);
    }
    for (std::vector<DenseLayer>& head : model.heads_) {
        for (DenseLayer& l : head) {
            glorot(l);
        }
    }
    return model;
}

std::size_t MultitaskModel::output_dim(TaskId task) const {
    if (task >= heads_.size()) {
        throw std::invalid_argument("output_dim: task out of range");
    }
    return spec_.heads[task].output_dim;
}

FlatVector MultitaskModel::flatten() const {
    std::vector<double> flat;
    flat.reserve(param_count_);
    auto append = [&flat](const DenseLayer& l) {
        flat.insert(flat.end(), l.weights.begin(), l.weights.end());
        flat.insert(flat.end(), l.biases.begin(), l.biases.end());
    };
    for (const DenseLayer& l : trunk_) {
        append(l);
    }
    for (const std::vector<DenseLayer>& head : heads_) {
        for (const DenseLayer& l : head) {
            append(l);
        }
    }
    return FlatVector(std::move(flat));
}

void MultitaskModel::load_flat(const FlatVector& params) {
    if (params.dim() != param_count_) {
        throw std::invalid_argument("load_flat: expected " +
                                    std::to_string(param_count_) + " parameters, got " +
                                    std::to_string(params.dim()));
    }
    std::size_t pos = 0;
    auto take = [&params, &pos](DenseLayer& l) {
        for (double& w : l.weights) {
            w = params[pos++];
        }
        for (double& b : l.biases) {
            b = params[pos++];
        }
    };
    for (DenseLayer& l : trunk_) {
        take(l);
    }
    for (std::vector<DenseLayer>& head : heads_) {
        for (DenseLayer& l : head) {
            take(l);
        }
    }
}

FlatVector MultitaskModel::mask_to_shared(const FlatVector& full) const {
    if (full.dim() != param_count_) {
        throw std::invalid_argument("mask_to_shared: dimension mismatch");
    }
    std::vector<double> masked(full.values());
    std::fill(masked.begin() + static_cast<std::ptrdiff_t>(trunk_param_count_),
              masked.end(), 0.0);
    return FlatVector(std::move(masked));
}

double forward_loss(const MultitaskModel& model, const TaskBatch& batch, TaskId task) {
    check_batch(model, batch, task);
    const ForwardCache cache = run_forward(model, batch, task);
    const double loss =
        loss_from_outputs(model.loss_kind(task), cache.head_acts.back(),
                          batch.targets[task], batch.batch_size,
                          model.output_dim(task));
    if (!std::isfinite(loss)) {
        throw std::runtime_error("forward pass produced a non-finite loss for task " +
                                 std::to_string(task));
    }
    return loss;
}

FlatVector task_gradient(const MultitaskModel& model, const TaskBatch& batch,
                         TaskId task, GradScope scope) {
    check_batch(model, batch, task);
    const ForwardCache cache = run_forward(model, batch, task);
    const std::size_t batch_size = batch.batch_size;
    std::vector<double> flat(model.param_count(), 0.0);

    const std::vector<DenseLayer>& head = model.head(task);

    // Offset of this task's head inside the flat layout.
    std::size_t head_offset = model.trunk_param_count();
    for (TaskId t = 0; t < task; ++t) {
        for (const DenseLayer& l : model.head(t)) {
            head_offset += l.param_count();
        }
    }

    std::vector<double> delta =
        loss_gradient(model.loss_kind(task), cache.head_acts.back(),
                      batch.targets[task], batch_size, model.output_dim(task));

    // Head layers, output to input. The final layer is linear; hidden head
    // layers need the tanh factor. Gradients are written straight into the
    // flat vector unless only the shared trunk is requested.
    std::size_t layer_offset = head_offset;
    for (const DenseLayer& l : head) {
        layer_offset += l.param_count();
    }
    for (std::size_t li = head.size(); li-- > 0;) {
        const DenseLayer& l = head[li];
        layer_offset -= l.param_count();
        if (li + 1 != head.size()) {
            apply_tanh_backward(delta, cache.head_acts[li + 1]);
        }
        std::vector<double> scratch_w(l.weights.size(), 0.0);
        std::vector<double> scratch_b(l.biases.size(), 0.0);
        double* wg = scope == GradScope::kFull ? flat.data() + layer_offset
                                               : scratch_w.data();
        double* bg = scope == GradScope::kFull
                         ? flat.data() + layer_offset + l.weights.size()
                         : scratch_b.data();
        delta = layer_backward(l, cache.head_acts[li], delta, batch_size, wg, bg);
    }

    // Trunk layers, output to input; all are tanh.
    layer_offset = model.trunk_param_count();
    for (std::size_t li = model.trunk().size(); li-- > 0;) {
        const DenseLayer& l = model.trunk()[li];
        layer_offset -= l.param_count();
        apply_tanh_backward(delta, cache.trunk_acts[li + 1]);
        delta = layer_backward(l, cache.trunk_acts[li], delta, batch_size,
                               flat.data() + layer_offset,
                               flat.data() + layer_offset + l.weights.size());
    }

    return FlatVector(std::move(flat));
}

void apply_update(MultitaskModel& model, const FlatVector& update, double lr) {
    if (update.dim() != model.param_count()) {
        throw std::invalid_argument("apply_update: expected " +
                                    std::to_string(model.param_count()) +
                                    " components, got " + std::to_string(update.dim()));
    }
    model.load_flat(axpy(-lr, update, model.flatten()));
}

FlatVector finite_diff_gradient(const MultitaskModel& model, const TaskBatch& batch,
                                TaskId task, double step) {
    if (!(step > 0.0)) {
        throw std::invalid_argument("finite_diff_gradient: step must be > 0");
    }
    check_batch(model, batch, task);
    MultitaskModel probe = model;
    FlatVector params = model.flatten();
    std::vector<double> grad(params.dim());
    for (std::size_t i = 0; i < params.dim(); ++i) {
        const double original = params[i];
        params[i] = original + step;
        probe.load_flat(params);
        const double up = forward_loss(probe, batch, task);
        params[i] = original - step;
        probe.load_flat(params);
        const double down = forward_loss(probe, batch, task);
        params[i] = original;
        grad[i] = (up - down) / (2.0 * step);
    }
    probe.load_flat(params);
    return FlatVector(std::move(grad));
}

} // namespace gradsurg
