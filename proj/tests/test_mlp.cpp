#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "gradsurg/mlp.hpp"
#include "test_support.hpp"

using namespace gradsurg;
using gradsurg::testing::vec;

namespace {

/// One linear unit y = w*x + b, MSE, no trunk.
ModelSpec single_unit_spec() {
    ModelSpec spec;
    spec.input_dim = 1;
    spec.heads.push_back({{}, 1, LossKind::kMeanSquaredError});
    return spec;
}

TaskBatch single_batch(double x, double target) {
    TaskBatch batch;
    batch.batch_size = 1;
    batch.input_dim = 1;
    batch.inputs = {x};
    batch.targets = {{target}};
    return batch;
}

ModelSpec random_small_spec(Rng& rng, std::size_t max_params = 200) {
    while (true) {
        ModelSpec spec;
        spec.input_dim = 1 + rng.uniform_below(5);
        const std::size_t trunk_layers = rng.uniform_below(3);
        for (std::size_t l = 0; l < trunk_layers; ++l) {
            spec.trunk_widths.push_back(1 + rng.uniform_below(6));
        }
        const std::size_t tasks = 2 + rng.uniform_below(3);
        for (std::size_t t = 0; t < tasks; ++t) {
            ModelSpec::HeadSpec head;
            if (rng.uniform() < 0.5) {
                head.loss = LossKind::kMeanSquaredError;
                head.output_dim = 1 + rng.uniform_below(3);
            } else {
                head.loss = LossKind::kCrossEntropy;
                head.output_dim = 2 + rng.uniform_below(3);
            }
            if (rng.uniform() < 0.3) {
                head.hidden_widths.push_back(1 + rng.uniform_below(4));
            }
            spec.heads.push_back(head);
        }
        MultitaskModel probe = MultitaskModel::init_zero(spec);
        if (probe.param_count() <= max_params) {
            return spec;
        }
    }
}

TaskBatch random_batch(Rng& rng, const MultitaskModel& model, std::size_t batch_size) {
    TaskBatch batch;
    batch.batch_size = batch_size;
    batch.input_dim = model.input_dim();
    batch.inputs.resize(batch_size * batch.input_dim);
    for (double& x : batch.inputs) {
        x = rng.normal();
    }
    batch.targets.resize(model.task_count());
    for (TaskId t = 0; t < model.task_count(); ++t) {
        const std::size_t out = model.output_dim(t);
        batch.targets[t].assign(batch_size * out, 0.0);
        if (model.loss_kind(t) == LossKind::kMeanSquaredError) {
            for (double& y : batch.targets[t]) {
                y = rng.normal();
            }
        } else {
            for (std::size_t b = 0; b < batch_size; ++b) {
                batch.targets[t][b * out + rng.uniform_below(out)] = 1.0;
            }
        }
    }
    return batch;
}

double max_relative_gap(const FlatVector& a, const FlatVector& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

} // namespace

TEST_SUITE_BEGIN("mlp");

TEST_CASE("zero model with zero targets has zero squared error") {
    ModelSpec spec;
    spec.input_dim = 3;
    spec.trunk_widths = {4};
    spec.heads.push_back({{}, 2, LossKind::kMeanSquaredError});
    spec.heads.push_back({{}, 1, LossKind::kMeanSquaredError});
    MultitaskModel model = MultitaskModel::init_zero(spec);

    TaskBatch batch;
    batch.batch_size = 2;
    batch.input_dim = 3;
    batch.inputs = {1, 2, 3, -1, 0, 1};
    batch.targets = {{0, 0, 0, 0}, {0, 0}};
    CHECK(forward_loss(model, batch, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(forward_loss(model, batch, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("single linear unit reproduces hand-computed loss and gradient") {
    MultitaskModel model = MultitaskModel::init_zero(single_unit_spec());
    // Layout is [w, b]; set w = 2, b = 0.
    model.load_flat(vec({2.0, 0.0}));
    CHECK(forward_loss(model, single_batch(1.0, 2.0), 0) == 0.0);

    model.load_flat(vec({1.0, 0.0}));
    CHECK(forward_loss(model, single_batch(1.0, 3.0), 0) == 4.0);

    const FlatVector grad =
        task_gradient(model, single_batch(1.0, 3.0), 0, GradScope::kFull);
    CHECK(grad[0] == -4.0); // dL/dw = 2(y - t) x
    CHECK(grad[1] == -4.0); // dL/db
}

TEST_CASE("gradient of an unused parameter is exactly zero") {
    Rng rng(41);
    ModelSpec spec;
    spec.input_dim = 2;
    spec.trunk_widths = {3};
    spec.heads.push_back({{}, 1, LossKind::kMeanSquaredError});
    spec.heads.push_back({{}, 1, LossKind::kMeanSquaredError});
    MultitaskModel model = MultitaskModel::init_random(spec, 5);
    const TaskBatch batch = random_batch(rng, model, 4);

    // Task 0's loss does not touch task 1's head parameters.
    const FlatVector grad = task_gradient(model, batch, 0, GradScope::kFull);
    const std::size_t head0_params = 3 + 1; // 3 weights + 1 bias
    for (std::size_t i = model.trunk_param_count() + head0_params;
         i < model.param_count(); ++i) {
        CHECK(grad[i] == 0.0);
    }
}

TEST_CASE("shared-only gradients zero every head position") {
    Rng rng(42);
    const ModelSpec spec = random_small_spec(rng);
    MultitaskModel model = MultitaskModel::init_random(spec, 6);
    const TaskBatch batch = random_batch(rng, model, 3);
    for (TaskId t = 0; t < model.task_count(); ++t) {
        const FlatVector shared = task_gradient(model, batch, t, GradScope::kSharedOnly);
        const FlatVector full = task_gradient(model, batch, t, GradScope::kFull);
        for (std::size_t i = 0; i < model.trunk_param_count(); ++i) {
            CHECK(shared[i] == full[i]);
        }
        for (std::size_t i = model.trunk_param_count(); i < model.param_count(); ++i) {
            CHECK(shared[i] == 0.0);
        }
        CHECK(model.mask_to_shared(full) == shared);
    }
}

TEST_CASE("autodiff matches central finite differences on random models") {
    Rng rng(43);
    for (int rep = 0; rep < 10; ++rep) {
        const ModelSpec spec = random_small_spec(rng);
        MultitaskModel model = MultitaskModel::init_random(spec, rng.next_u64());
        const TaskBatch batch = random_batch(rng, model, 1 + rng.uniform_below(5));
        const TaskId task = rng.uniform_below(model.task_count());
        const FlatVector analytic = task_gradient(model, batch, task, GradScope::kFull);
        const FlatVector numeric = finite_diff_gradient(model, batch, task, 1e-5);
        CHECK(max_relative_gap(analytic, numeric) <= 1e-5);
    }
}

TEST_CASE("finite differences recover a simple quadratic derivative") {
    // Loss (w*1 + b - 0)^2 at w=3, b=0: dL/dw = 2*3 = 6.
    MultitaskModel model = MultitaskModel::init_zero(single_unit_spec());
    model.load_flat(vec({3.0, 0.0}));
    const FlatVector g = finite_diff_gradient(model, single_batch(1.0, 0.0), 0, 1e-5);
    CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-6));

    // Constant loss: zero targets, zero weights, gradient vanishes.
    model.load_flat(vec({0.0, 0.0}));
    const FlatVector z = finite_diff_gradient(model, single_batch(0.0, 0.0), 0, 1e-5);
    CHECK(std::abs(z[0]) <= 1e-9);
    CHECK(std::abs(z[1]) <= 1e-9);
}

TEST_CASE("apply_update steps against the gradient and is reversible") {
    MultitaskModel model = MultitaskModel::init_zero(single_unit_spec());
    model.load_flat(vec({1.0, 0.0}));

    apply_update(model, vec({0.5, 0.0}), 0.0);
    CHECK(model.flatten() == vec({1.0, 0.0})); // lr = 0

    apply_update(model, vec({0.0, 0.0}), 0.7);
    CHECK(model.flatten() == vec({1.0, 0.0})); // zero update

    apply_update(model, vec({0.5, 0.0}), 0.1);
    CHECK(model.flatten()[0] == doctest::Approx(0.95).epsilon(1e-15));

    CHECK_THROWS_AS(apply_update(model, vec({1.0}), 0.1), std::invalid_argument);
}

TEST_CASE("apply_update with lr then -lr restores parameters") {
    Rng rng(44);
    const ModelSpec spec = random_small_spec(rng);
    MultitaskModel model = MultitaskModel::init_random(spec, 9);
    const FlatVector before = model.flatten();
    const FlatVector update = gradsurg::testing::random_vector(rng, before.dim());
    apply_update(model, update, 0.3);
    apply_update(model, update, -0.3);
    const FlatVector after = model.flatten();
    for (std::size_t i = 0; i < before.dim(); ++i) {
        CHECK(std::abs(after[i] - before[i]) <=
              1e-12 * std::max(1.0, std::abs(before[i])));
    }
}

TEST_CASE("flatten and load_flat round-trip bit-exactly") {
    Rng rng(45);
    for (int rep = 0; rep < 10; ++rep) {
        const ModelSpec spec = random_small_spec(rng);
        MultitaskModel model = MultitaskModel::init_random(spec, rng.next_u64());
        const FlatVector flat = model.flatten();
        MultitaskModel other = MultitaskModel::init_zero(spec);
        other.load_flat(flat);
        CHECK(other.flatten() == flat);
    }
}

TEST_CASE("forward pass reports the layer that produced non-finite values") {
    MultitaskModel model = MultitaskModel::init_zero(single_unit_spec());
    model.load_flat(vec({1e300, 0.0}));
    const TaskBatch batch = single_batch(1e300, 0.0); // w*x overflows
    CHECK_THROWS_WITH_AS(forward_loss(model, batch, 0),
                         doctest::Contains("head layer 0"), std::runtime_error);
}

TEST_CASE("deterministic initialization under a seed") {
    ModelSpec spec;
    spec.input_dim = 4;
    spec.trunk_widths = {5, 3};
    spec.heads.push_back({{}, 2, LossKind::kMeanSquaredError});
    spec.heads.push_back({{2}, 2, LossKind::kCrossEntropy});
    const MultitaskModel a = MultitaskModel::init_random(spec, 77);
    const MultitaskModel b = MultitaskModel::init_random(spec, 77);
    const MultitaskModel c = MultitaskModel::init_random(spec, 78);
    CHECK(a.flatten() == b.flatten());
    CHECK(a.flatten() != c.flatten());
}

TEST_SUITE_END();
