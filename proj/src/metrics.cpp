#include "gradsurg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gradsurg {

double nds(const DetectionErrors& err) {
    if (!(err.mean_ap >= 0.0 && err.mean_ap <= 1.0)) {
        throw std::invalid_argument("nds: mean_ap must be in [0, 1]");
    }
    const double errors[] = {err.translation_err, err.scale_err, err.orientation_err,
                             err.velocity_err, err.attribute_err};
    double bracket = 5.0 * err.mean_ap;
    for (double e : errors) {
        if (!(e >= 0.0) || !std::isfinite(e)) {
            throw std::invalid_argument("nds: error metrics must be finite and >= 0");
        }
        bracket += 1.0 - std::min(1.0, e);
    }
    return bracket / 10.0;
}

ConflictStats conflict_stats(const GradientSet& grads, double eps) {
    const std::size_t k = grads.task_count();
    std::size_t pairs = 0;
    std::size_t conflicts = 0;
    std::size_t cosine_pairs = 0;
    double cosine_sum = 0.0;
    for (TaskId i = 0; i < k; ++i) {
        for (TaskId j = i + 1; j < k; ++j) {
            ++pairs;
            if (dot(grads.gradient(i), grads.gradient(j)) < 0.0) {
                ++conflicts;
            }
            const double ni = norm_sq(grads.gradient(i));
            const double nj = norm_sq(grads.gradient(j));
            if (ni >= eps && nj >= eps) {
                cosine_sum += dot(grads.gradient(i), grads.gradient(j)) /
                              std::sqrt(ni * nj);
                ++cosine_pairs;
            }
        }
    }
    ConflictStats stats;
    stats.conflict_fraction =
        static_cast<double>(conflicts) / static_cast<double>(pairs);
    stats.mean_pairwise_cosine =
        cosine_pairs > 0 ? cosine_sum / static_cast<double>(cosine_pairs) : 0.0;
    return stats;
}

} // namespace gradsurg
