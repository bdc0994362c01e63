#ifndef GRADSURG_RNG_HPP
#define GRADSURG_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace gradsurg {

/// Seedable, portable pseudo-random generator. The engine is std::mt19937_64,
/// whose output sequence is fixed by the C++ standard; all derived draws
/// (uniform doubles, bounded integers, normals, shuffles) are implemented here
/// so that runs replay bit-identically across platforms and standard libraries.
///
/// Algorithm identifier recorded in run metadata: see kRngAlgorithmId.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 bits of randomness.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound), bound > 0. Unbiased via rejection.
    std::uint64_t uniform_below(std::uint64_t bound);

    /// Standard normal deviate (Marsaglia polar method, pair-cached).
    double normal();

    /// Fisher-Yates shuffle, driven by uniform_below.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

/// Identifier for the full RNG protocol above, written into output metadata.
inline constexpr std::string_view kRngAlgorithmId =
    "mt19937_64/u53/rejection-int/polar-normal";

/// Derives an independent stream seed from a base seed and stream labels
/// (splitmix64 finalization over the concatenated words).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

} // namespace gradsurg

#endif
