#pragma once

// Central tolerance policy.  Every numeric gate in the library goes through
// the values and helpers here so thresholds are pinned in exactly one place.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace carrollforge {

namespace tol {
// Pass threshold on normalized residuals (residual / (1 + scale at point)).
inline constexpr double kResidual = 1e-9;
// Zero-test band for scalar fields over a sample grid.
inline constexpr double kVanishMax = 1e-9;     // vanishing: grid max below this
inline constexpr double kNonVanishMin = 1e-6;  // non-vanishing: grid min above this
// Agreement between closed-form builders and pointwise linear-system recovery.
inline constexpr double kUniqueness = 1e-8;
// Finite-difference cross-checks.
inline constexpr double kFdStep = 1e-6;
inline constexpr double kFdRel = 1e-5;
// Residual of the fibre-direction Lie derivative after a boost.
inline constexpr double kBoostLie = 1e-12;
// Homothety residual on flat slices.
inline constexpr double kHomothetyFlat = 1e-10;
// Frame/coframe duality.
inline constexpr double kDuality = 1e-10;
// Perturbation sensitivity: eps applied to one coefficient must push some
// residual above the detection floor.
inline constexpr double kPerturbEps = 1e-3;
inline constexpr double kPerturbDetect = 1e-4;
}  // namespace tol

struct CheckError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Running statistics for one named residual over a sample grid.  `add` takes
// the raw residual together with the magnitude of the quantities entering the
// identity at that point; the normalized residual divides by (1 + scale).
struct ResidualStat {
    double max_norm = 0.0;
    double max_abs = 0.0;
    double sum_norm = 0.0;
    std::uint64_t count = 0;

    void add(double resid, double scale) {
        double r = std::abs(resid);
        double n = r / (1.0 + std::abs(scale));
        max_abs = std::max(max_abs, r);
        max_norm = std::max(max_norm, n);
        sum_norm += n;
        ++count;
    }
    void merge(const ResidualStat& o) {
        max_norm = std::max(max_norm, o.max_norm);
        max_abs = std::max(max_abs, o.max_abs);
        sum_norm += o.sum_norm;
        count += o.count;
    }
    double mean_norm() const { return count ? sum_norm / static_cast<double>(count) : 0.0; }
    bool passes(double tolerance) const { return max_norm < tolerance; }
};

using ResidualMap = std::map<std::string, ResidualStat>;

inline double max_residual(const ResidualMap& m) {
    double v = 0;
    for (const auto& [_, s] : m) v = std::max(v, s.max_norm);
    return v;
}

inline bool all_pass(const ResidualMap& m, double tolerance) {
    for (const auto& [_, s] : m)
        if (!s.passes(tolerance)) return false;
    return true;
}

// Outcome of a branching check.  `branch` names the case that applied,
// `residuals` holds the gated quantities, and `factor_samples` keeps any
// pointwise factor the branch computes along the way (a constancy ratio, a
// fitted proportionality coefficient) so callers can report it.
struct Verdict {
    bool ok = false;
    std::string branch;
    ResidualMap residuals;
    std::vector<double> factor_samples;
    std::vector<std::string> notes;
};

// Uniform zero-classification of a scalar field sampled over a grid.
enum class ZeroClass { Vanishing, NonVanishing, Indeterminate, MixedSign };

inline const char* to_string(ZeroClass z) {
    switch (z) {
        case ZeroClass::Vanishing: return "vanishing";
        case ZeroClass::NonVanishing: return "non-vanishing";
        case ZeroClass::Indeterminate: return "indeterminate";
        case ZeroClass::MixedSign: return "mixed-sign";
    }
    return "?";
}

// Classify signed scalar samples.  A field counts as vanishing when every
// sample sits below the vanish band, as non-vanishing when every sample sits
// above the floor with one common sign, and as mixed-sign when the magnitude
// is uniformly large but the sign flips (so a zero crossing hides between
// samples).  Everything else is indeterminate and callers must refuse to
// branch on it.
inline ZeroClass classify_signed_samples(const std::vector<double>& v) {
    if (v.empty()) throw CheckError("cannot classify an empty sample set");
    double max_abs = 0, min_abs = std::abs(v[0]);
    bool pos = false, neg = false;
    for (double x : v) {
        max_abs = std::max(max_abs, std::abs(x));
        min_abs = std::min(min_abs, std::abs(x));
        if (x > 0) pos = true;
        if (x < 0) neg = true;
    }
    if (max_abs < tol::kVanishMax) return ZeroClass::Vanishing;
    if (min_abs > tol::kNonVanishMin)
        return (pos && neg) ? ZeroClass::MixedSign : ZeroClass::NonVanishing;
    return ZeroClass::Indeterminate;
}

// Same policy for nonnegative magnitudes (norms), where sign is meaningless.
inline ZeroClass classify_norm_samples(const std::vector<double>& v) {
    if (v.empty()) throw CheckError("cannot classify an empty sample set");
    double max_v = 0, min_v = v[0];
    for (double x : v) {
        max_v = std::max(max_v, x);
        min_v = std::min(min_v, x);
    }
    if (max_v < tol::kVanishMax) return ZeroClass::Vanishing;
    if (min_v > tol::kNonVanishMin) return ZeroClass::NonVanishing;
    return ZeroClass::Indeterminate;
}

}  // namespace carrollforge
