#include "gradsurg/vecmath.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace gradsurg {

namespace {

void require_same_dim(const FlatVector& a, const FlatVector& b, const char* op) {
    if (a.dim() != b.dim()) {
        throw std::invalid_argument(std::string(op) + ": dimension mismatch (" +
                                    std::to_string(a.dim()) + " vs " +
                                    std::to_string(b.dim()) + ")");
    }
}

} // namespace

FlatVector::FlatVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) {
        throw std::invalid_argument("FlatVector: dim must be positive");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw std::invalid_argument("FlatVector: non-finite component at index " +
                                        std::to_string(i));
        }
    }
}

FlatVector FlatVector::zeros(std::size_t dim) {
    return FlatVector(std::vector<double>(dim, 0.0));
}

double dot(const FlatVector& a, const FlatVector& b) {
    require_same_dim(a, b, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

double norm_sq(const FlatVector& a) {
    return dot(a, a);
}

FlatVector axpy(double alpha, const FlatVector& x, const FlatVector& y) {
    require_same_dim(x, y, "axpy");
    std::vector<double> out(x.dim());
    for (std::size_t i = 0; i < x.dim(); ++i) {
        out[i] = alpha * x[i] + y[i];
    }
    return FlatVector(std::move(out));
}

} // namespace gradsurg
