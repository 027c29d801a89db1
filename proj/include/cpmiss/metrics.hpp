#pragma once

#include "cpmiss/core.hpp"

#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace cpmiss {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Atom {
    double value = 0.0;
    double weight = 0.0;
};

/// Finite atoms with nonnegative weights plus a reserved mass at +infinity.
/// Weights need not be normalized; quantile queries normalize by the total.
struct WeightedEmpirical {
    std::vector<Atom> atoms;
    double inf_mass = 0.0;

    /// Equal weight on every value and on +infinity (the split-conformal distribution).
    static WeightedEmpirical uniform_with_inf(std::span<const double> values);

    double total_mass() const noexcept;
};

/// inf{z : F(z) >= level} for the normalized distribution; +infinity when the
/// finite atoms never reach `level`. Equal-valued atoms are merged before the
/// scan. Cumulative masses within 1e-12 (relative) of the target count as
/// reaching it, so k/(n+1) sums land on the right order statistic.
double weighted_quantile(const WeightedEmpirical& dist, double level);

/// Same as weighted_quantile for atoms whose values are already sorted ascending.
/// `weights[i]` belongs to `sorted_values[i]`.
double weighted_quantile_sorted(std::span<const double> sorted_values, std::span<const double> weights,
                                double inf_mass, double level);

/// Heterogeneous Euclidean-Overlap Metric. Per-attribute distance is 1 when
/// either side is missing, otherwise |a_j - b_j| / range_j.
double heom_distance(const MaskedSample& a, const MaskedSample& b, std::span<const double> ranges);

enum class KernelKind { Gaussian };

struct KernelSpec {
    KernelKind kind = KernelKind::Gaussian;
    double bandwidth = 1.0;

    /// K(u); the Gaussian kernel is exp(-u^2 / 2).
    double evaluate(double u) const;
};

struct KernelWeights {
    std::vector<double> weights;
    /// Every kernel value underflowed and uniform weights were returned.
    bool uniform_fallback = false;
};

/// p_h(X_j | x) = K(d(X_j, x)/h) / sum_l K(d(X_l, x)/h).
KernelWeights kernel_weights(std::span<const MaskedSample> targets, const MaskedSample& x, const KernelSpec& spec,
                             std::span<const double> ranges);

/// Normalizes kernel values of precomputed distances (same contract as kernel_weights).
KernelWeights kernel_weights_from_distances(std::span<const double> distances, const KernelSpec& spec);

/// Median of HEOM distances over all unordered pairs of distinct points.
/// A zero median falls back to the smallest positive distance, and to 1 when
/// every distance is 0.
double median_pairwise_bandwidth(std::span<const MaskedSample> points, std::span<const double> ranges);

} // namespace cpmiss
