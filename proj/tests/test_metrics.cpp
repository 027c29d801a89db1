#include "cpmiss/error.hpp"
#include "cpmiss/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace cpmiss;

namespace {

// Direct scan of the normalized CDF over sorted distinct values.
double brute_quantile(std::vector<Atom> atoms, double inf_mass, double level) {
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.value < b.value; });
    double total = inf_mass;
    for (const auto& a : atoms) total += a.weight;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        double cdf = 0.0;
        for (const auto& a : atoms) {
            if (a.value <= atoms[i].value) cdf += a.weight;
        }
        if (cdf / total >= level - 1e-12) return atoms[i].value;
    }
    return kInf;
}

} // namespace

TEST_SUITE("metrics") {

TEST_CASE("uniform quantile with infinity atom") {
    const std::vector<double> v{3.0, 1.0, 2.0, 5.0, 4.0};
    // n = 5: level 0.5 needs ceil(0.5 * 6) = 3 of 6 atoms.
    CHECK(weighted_quantile(WeightedEmpirical::uniform_with_inf(v), 0.5) == 3.0);
    CHECK(weighted_quantile(WeightedEmpirical::uniform_with_inf(v), 5.0 / 6.0) == 5.0);
    CHECK(std::isinf(weighted_quantile(WeightedEmpirical::uniform_with_inf(v), 0.9)));
    const std::vector<double> nine{1, 2, 3, 4, 5, 6, 7, 8, 9};
    CHECK(weighted_quantile(WeightedEmpirical::uniform_with_inf(nine), 0.9) == 9.0);
}

TEST_CASE("weighted quantile with ties and zero inf mass") {
    WeightedEmpirical d;
    d.atoms = {{2.0, 0.25}, {1.0, 0.25}, {2.0, 0.25}, {3.0, 0.25}};
    CHECK(weighted_quantile(d, 0.25) == 1.0);
    CHECK(weighted_quantile(d, 0.5) == 2.0);
    CHECK(weighted_quantile(d, 0.75) == 2.0);
    CHECK(weighted_quantile(d, 0.76) == 3.0);
}

TEST_CASE("quantile errors") {
    WeightedEmpirical empty;
    CHECK_THROWS_AS(weighted_quantile(empty, 0.5), EmptyDistributionError);
    WeightedEmpirical d;
    d.atoms = {{1.0, 1.0}};
    CHECK_THROWS_AS(weighted_quantile(d, 0.0), DomainError);
    CHECK_THROWS_AS(weighted_quantile(d, 1.0), DomainError);
    d.atoms = {{1.0, -1.0}};
    CHECK_THROWS_AS(weighted_quantile(d, 0.5), DomainError);
}

TEST_CASE("weighted quantile agrees with a brute-force CDF scan") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        WeightedEmpirical d;
        const int n = 1 + static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) d.atoms.push_back({std::floor(u(rng) * 5), u(rng)});
        d.inf_mass = (trial % 2) ? u(rng) : 0.0;
        const double level = 0.01 + 0.98 * u(rng);
        CHECK(weighted_quantile(d, level) == brute_quantile(d.atoms, d.inf_mass, level));
    }
}

TEST_CASE("sorted variant matches") {
    const std::vector<double> v{1.0, 2.0, 2.0, 7.0};
    const std::vector<double> w{0.1, 0.2, 0.3, 0.2};
    WeightedEmpirical d;
    for (std::size_t i = 0; i < v.size(); ++i) d.atoms.push_back({v[i], w[i]});
    d.inf_mass = 0.2;
    for (double level : {0.05, 0.1, 0.3, 0.6, 0.8, 0.85}) {
        CHECK(weighted_quantile_sorted(v, w, 0.2, level) == weighted_quantile(d, level));
    }
}

TEST_CASE("HEOM distance") {
    const std::vector<double> ranges{1.0, 1.0};
    MaskedSample a({0.0, 0.0});
    MaskedSample b({0.5, 0.5});
    CHECK(heom_distance(a, b, ranges) == doctest::Approx(0.70711).epsilon(1e-5));
    MaskedSample c({std::nullopt, 0.0});
    CHECK(heom_distance(a, c, ranges) == doctest::Approx(1.0));
    const std::vector<double> wide{2.0, 4.0};
    CHECK(heom_distance(a, MaskedSample({1.0, 2.0}), wide) == doctest::Approx(std::sqrt(0.25 + 0.25)));
    CHECK(heom_distance(a, a, ranges) == 0.0);
}

TEST_CASE("gaussian kernel weights") {
    const std::vector<double> dist{0.0, 1.0};
    const auto kw = kernel_weights_from_distances(dist, KernelSpec{KernelKind::Gaussian, 1.0});
    CHECK(kw.weights[0] == doctest::Approx(0.6225).epsilon(1e-4));
    CHECK(kw.weights[1] == doctest::Approx(0.3775).epsilon(1e-4));
    CHECK_FALSE(kw.uniform_fallback);
    const std::vector<double> far{1e6, 2e6};
    const auto fb = kernel_weights_from_distances(far, KernelSpec{KernelKind::Gaussian, 1e-3});
    CHECK(fb.uniform_fallback);
    CHECK(fb.weights[0] == doctest::Approx(0.5));
    CHECK_THROWS_AS(kernel_weights_from_distances(dist, KernelSpec{KernelKind::Gaussian, 0.0}), ConfigError);
    CHECK_THROWS_AS(kernel_weights_from_distances({}, KernelSpec{}), InsufficientDataError);

    std::vector<MaskedSample> targets{MaskedSample({0.0}), MaskedSample({1.0})};
    const std::vector<double> r{1.0};
    const auto kv = kernel_weights(targets, MaskedSample({0.0}), KernelSpec{KernelKind::Gaussian, 1.0}, r);
    CHECK(kv.weights[0] == doctest::Approx(0.6225).epsilon(1e-4));
}

TEST_CASE("median pairwise bandwidth matches brute force") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    std::vector<MaskedSample> pts;
    for (int i = 0; i < 100; ++i) {
        std::vector<std::optional<double>> x(3);
        for (auto& v : x) v = n01(rng);
        if (i % 7 == 0) x[1] = std::nullopt;
        pts.emplace_back(x);
    }
    const std::vector<double> ranges{4.0, 4.0, 4.0};
    std::vector<double> all;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) all.push_back(heom_distance(pts[i], pts[j], ranges));
    }
    std::sort(all.begin(), all.end());
    const std::size_t m = all.size();
    const double expected = (m % 2) ? all[m / 2] : 0.5 * (all[m / 2 - 1] + all[m / 2]);
    CHECK(median_pairwise_bandwidth(pts, ranges) == doctest::Approx(expected).epsilon(1e-14));

    std::vector<MaskedSample> same(4, MaskedSample({1.0}));
    const std::vector<double> r1{1.0};
    CHECK(median_pairwise_bandwidth(same, r1) == 1.0);
    CHECK_THROWS_AS(median_pairwise_bandwidth(std::span(same).first(1), r1), InsufficientDataError);
}

}
