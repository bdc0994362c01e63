#ifndef GRADSURG_METRICS_HPP
#define GRADSURG_METRICS_HPP

#include "gradsurg/surgery.hpp"

namespace gradsurg {

/// Detection quality summary: mean average precision plus the five
/// true-positive error metrics (translation, scale, orientation, velocity,
/// attribute). mean_ap lies in [0, 1]; errors are non-negative.
struct DetectionErrors {
    double mean_ap = 0.0;
    double translation_err = 0.0;
    double scale_err = 0.0;
    double orientation_err = 0.0;
    double velocity_err = 0.0;
    double attribute_err = 0.0;
};

/// Composite detection score in [0, 1]: one tenth of five times mean_ap plus
/// the clamped complements of the five error metrics. An error of 1 or more
/// contributes exactly zero.
double nds(const DetectionErrors& err);

struct ConflictStats {
    /// Fraction of unordered task pairs whose gradients have negative dot.
    double conflict_fraction = 0.0;
    /// Mean cosine over pairs where both gradients have norm_sq >= eps;
    /// zero when no such pair exists.
    double mean_pairwise_cosine = 0.0;
};

ConflictStats conflict_stats(const GradientSet& grads, double eps = kProjectionEps);

} // namespace gradsurg

#endif
