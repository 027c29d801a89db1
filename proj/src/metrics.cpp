#include "cpmiss/metrics.hpp"

#include "cpmiss/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cpmiss {

namespace {

constexpr double kMassTolerance = 1e-12;

void check_level(double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw DomainError("quantile level must lie in (0, 1)");
    }
}

} // namespace

WeightedEmpirical WeightedEmpirical::uniform_with_inf(std::span<const double> values) {
    WeightedEmpirical dist;
    dist.atoms.reserve(values.size());
    for (double v : values) {
        dist.atoms.push_back({v, 1.0});
    }
    dist.inf_mass = 1.0;
    return dist;
}

double WeightedEmpirical::total_mass() const noexcept {
    double total = inf_mass;
    for (const auto& a : atoms) total += a.weight;
    return total;
}

double weighted_quantile(const WeightedEmpirical& dist, double level) {
    check_level(level);
    if (dist.inf_mass < 0.0) {
        throw DomainError("weighted_quantile: negative mass at +inf");
    }
    for (const auto& a : dist.atoms) {
        if (!(a.weight >= 0.0)) throw DomainError("weighted_quantile: negative atom weight");
        if (std::isnan(a.value)) throw DomainError("weighted_quantile: NaN atom");
    }
    const double total = dist.total_mass();
    if (dist.atoms.empty() && dist.inf_mass == 0.0) {
        throw EmptyDistributionError("weighted_quantile: empty distribution");
    }
    if (!(total > 0.0)) {
        throw EmptyDistributionError("weighted_quantile: total mass is zero");
    }

    std::vector<Atom> sorted = dist.atoms;
    std::stable_sort(sorted.begin(), sorted.end(), [](const Atom& a, const Atom& b) { return a.value < b.value; });

    const double target = level * total * (1.0 - kMassTolerance);
    double cumulative = 0.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        const double v = sorted[i].value;
        // merge ties
        while (i < sorted.size() && sorted[i].value == v) {
            cumulative += sorted[i].weight;
            ++i;
        }
        if (cumulative >= target && cumulative > 0.0) {
            return v;
        }
    }
    return kInf;
}

double weighted_quantile_sorted(std::span<const double> sorted_values, std::span<const double> weights,
                                double inf_mass, double level) {
    check_level(level);
    if (sorted_values.size() != weights.size()) {
        throw DimensionError("weighted_quantile_sorted: values/weights length mismatch");
    }
    double total = inf_mass;
    for (double w : weights) total += w;
    if (!(total > 0.0)) {
        throw EmptyDistributionError("weighted_quantile_sorted: total mass is zero");
    }
    const double target = level * total * (1.0 - kMassTolerance);
    double cumulative = 0.0;
    std::size_t i = 0;
    while (i < sorted_values.size()) {
        const double v = sorted_values[i];
        while (i < sorted_values.size() && sorted_values[i] == v) {
            cumulative += weights[i];
            ++i;
        }
        if (cumulative >= target && cumulative > 0.0) {
            return v;
        }
    }
    return kInf;
}

double heom_distance(const MaskedSample& a, const MaskedSample& b, std::span<const double> ranges) {
    if (a.dim() != b.dim() || a.dim() != ranges.size()) {
        throw DimensionError("heom_distance: dimension mismatch");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < a.dim(); ++j) {
        const auto& u = a.x()[j];
        const auto& v = b.x()[j];
        if (!u || !v) {
            sum += 1.0;
        } else {
            const double dj = std::abs(*u - *v) / ranges[j];
            sum += dj * dj;
        }
    }
    return std::sqrt(sum);
}

double KernelSpec::evaluate(double u) const {
    switch (kind) {
    case KernelKind::Gaussian:
        return std::exp(-0.5 * u * u);
    }
    return 0.0;
}

KernelWeights kernel_weights_from_distances(std::span<const double> distances, const KernelSpec& spec) {
    if (distances.empty()) {
        throw InsufficientDataError("kernel_weights: no targets");
    }
    if (!(spec.bandwidth > 0.0)) {
        throw ConfigError("kernel bandwidth must be positive");
    }
    KernelWeights out;
    out.weights.resize(distances.size());
    double total = 0.0;
    for (std::size_t i = 0; i < distances.size(); ++i) {
        out.weights[i] = spec.evaluate(distances[i] / spec.bandwidth);
        total += out.weights[i];
    }
    if (!(total > 0.0)) {
        std::fill(out.weights.begin(), out.weights.end(), 1.0 / static_cast<double>(distances.size()));
        out.uniform_fallback = true;
        return out;
    }
    for (auto& w : out.weights) w /= total;
    return out;
}

KernelWeights kernel_weights(std::span<const MaskedSample> targets, const MaskedSample& x, const KernelSpec& spec,
                             std::span<const double> ranges) {
    std::vector<double> distances(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        distances[i] = heom_distance(targets[i], x, ranges);
    }
    return kernel_weights_from_distances(distances, spec);
}

double median_pairwise_bandwidth(std::span<const MaskedSample> points, std::span<const double> ranges) {
    const std::size_t n = points.size();
    if (n < 2) {
        throw InsufficientDataError("median_pairwise_bandwidth: need at least two points");
    }
    std::vector<double> d;
    d.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            d.push_back(heom_distance(points[i], points[j], ranges));
        }
    }
    const std::size_t m = d.size();
    const auto mid = d.begin() + static_cast<std::ptrdiff_t>(m / 2);
    std::nth_element(d.begin(), mid, d.end());
    double median = *mid;
    if (m % 2 == 0) {
        const double lower = *std::max_element(d.begin(), mid);
        median = 0.5 * (lower + median);
    }
    if (median > 0.0) return median;

    double smallest = kInf;
    for (double v : d) {
        if (v > 0.0) smallest = std::min(smallest, v);
    }
    return std::isfinite(smallest) ? smallest : 1.0;
}

} // namespace cpmiss
