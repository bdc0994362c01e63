#ifndef GRADSURG_VECMATH_HPP
#define GRADSURG_VECMATH_HPP

#include <cstddef>
#include <vector>

namespace gradsurg {

/// Dense flat vector of 64-bit floats over a fixed parameter space.
/// Components are validated to be finite on construction; dim >= 1.
class FlatVector {
public:
    explicit FlatVector(std::vector<double> values);

    static FlatVector zeros(std::size_t dim);

    std::size_t dim() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    const std::vector<double>& values() const { return values_; }

    bool operator==(const FlatVector& other) const = default;

private:
    std::vector<double> values_;
};

/// Left-to-right sequential inner product. Deterministic across runs.
double dot(const FlatVector& a, const FlatVector& b);

/// Squared Euclidean norm, computed exactly as dot(a, a).
double norm_sq(const FlatVector& a);

/// alpha*x + y as a new vector; inputs are untouched.
FlatVector axpy(double alpha, const FlatVector& x, const FlatVector& y);

} // namespace gradsurg

#endif
