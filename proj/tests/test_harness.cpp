#include "cpmiss/error.hpp"
#include "cpmiss/harness.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace cpmiss;

namespace {

ExperimentConfig small_config(std::size_t d = 3, Mechanism mech = Mechanism::MCAR) {
    auto cfg = ExperimentConfig::benchmark(d, mech);
    cfg.sizes = {120, 60, 200, 20};
    cfg.reps = 2;
    cfg.master_seed = 17;
    cfg.pilot_size = 5000;
    cfg.methods = {Method::CP, Method::NexCP, Method::LCP, Method::CQR, Method::CqrMdaExact};
    return cfg;
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("group layout") {
    auto cfg = small_config();
    const auto groups = experiment_groups(cfg);
    REQUIRE(groups.size() == 7);
    CHECK(groups.front().label() == "[000]");
    CHECK(groups.back().label() == "[110]");
    cfg.include_all_missing_group = true;
    CHECK(experiment_groups(cfg).back().label() == "[111]");

    const auto d5 = small_config(5);
    const auto g5 = experiment_groups(d5);
    REQUIRE(g5.size() == 5);
    CHECK(g5[2].label() == "size:2");

    const auto mar = small_config(3, Mechanism::MAR);
    const auto gm = experiment_groups(mar);
    CHECK(gm.size() == 4);
    for (const auto& g : gm) CHECK(g.mask.observed(0));
}

TEST_CASE("sampler acceptance matches independent Bernoulli masks") {
    const auto cfg = small_config();
    const auto amp = calibrate_experiment_amputer(cfg);
    GroupKey key;
    key.mask = Mask::parse("100");
    Rng rng(5);
    std::size_t attempts = 0;
    const auto pts = mask_group_sampler(cfg.dgp, amp, key, 3000, rng, 1'000'000, &attempts);
    CHECK(pts.size() == 3000);
    for (const auto& p : pts) CHECK(p.mask() == key.mask);
    CHECK(std::abs(3000.0 / double(attempts) - 0.128) < 0.01);

    GroupKey zero;
    zero.mask = Mask(3);
    for (const auto& p : mask_group_sampler(cfg.dgp, amp, zero, 50, rng, 1'000'000)) {
        for (const auto& v : p.x()) CHECK(v.has_value());
    }
    GroupKey size2;
    size2.kind = GroupKey::Kind::PatternSize;
    size2.size = 2;
    const auto d5 = small_config(5);
    const auto amp5 = calibrate_experiment_amputer(d5);
    for (const auto& p : mask_group_sampler(d5.dgp, amp5, size2, 100, rng, 1'000'000)) CHECK(p.mask().count() == 2);

    GroupKey impossible;
    impossible.mask = Mask::parse("111");
    CHECK_THROWS_AS(mask_group_sampler(cfg.dgp, amp, impossible, 100, rng, 500), UnreachableGroupError);
}

TEST_CASE("single repetition report structure") {
    auto cfg = small_config();
    cfg.reps = 1;
    cfg.methods = {Method::CP};
    const auto report = run_experiment(cfg);
    CHECK(report.groups.size() == 8);
    CHECK(report.groups.front() == kMarginalGroup);
    CHECK(report.cells.size() == 8);
    CHECK(report.at(Method::CP, kMarginalGroup).n_points == 200);
    CHECK(report.at(Method::CP, "[011]").n_points == 20);
}

TEST_CASE("aggregates equal a recount of the per-point records") {
    auto cfg = small_config();
    cfg.keep_points = true;
    const auto report = run_experiment(cfg);
    std::map<std::pair<Method, std::string>, GroupStats> recount;
    for (const auto& p : report.points) {
        auto& st = recount[{p.method, p.group}];
        ++st.n_points;
        if (p.lower <= p.y && p.y <= p.upper) ++st.n_covered;
        if (std::isinf(p.lower) || std::isinf(p.upper)) {
            ++st.n_infinite;
        } else {
            st.finite_length_sum += p.upper - p.lower;
        }
    }
    REQUIRE(recount.size() == report.cells.size());
    for (const auto& [key, st] : report.cells) {
        const auto& r = recount.at(key);
        CHECK(r.n_points == st.n_points);
        CHECK(r.n_covered == st.n_covered);
        CHECK(r.n_infinite == st.n_infinite);
        CHECK(r.finite_length_sum == doctest::Approx(st.finite_length_sum).epsilon(1e-12));
        CHECK(st.coverage() == double(r.n_covered) / double(r.n_points));
    }
}

TEST_CASE("results do not depend on the worker count") {
    auto cfg = small_config();
    cfg.reps = 4;
    const auto a = run_experiment(cfg);
    cfg.workers = 3;
    const auto b = run_experiment(cfg);
    REQUIRE(a.cells.size() == b.cells.size());
    for (const auto& [key, st] : a.cells) {
        const auto& o = b.cells.at(key);
        CHECK(st.n_covered == o.n_covered);
        CHECK(st.finite_length_sum == o.finite_length_sum);
    }
}

TEST_CASE("train, calibration and test splits are disjoint") {
    const auto cfg = small_config();
    const auto amp = calibrate_experiment_amputer(cfg);
    for (std::uint64_t rep = 0; rep < 3; ++rep) {
        const auto s = draw_repetition(cfg, amp, rep);
        CHECK(s.train.size() == cfg.sizes.n_train);
        CHECK(s.calib.size() == cfg.sizes.n_calib);
        CHECK(s.test_marginal.size() == cfg.sizes.n_test_marginal);
        std::set<double> seen;
        std::size_t total = 0;
        for (const auto* ds : {&s.train, &s.calib, &s.test_marginal}) {
            for (const auto& x : *ds) {
                seen.insert(*x.y());
                ++total;
            }
        }
        CHECK(seen.size() == total);
    }
}

TEST_CASE("group stats conventions") {
    GroupStats st;
    st.add(0.0, PredictionInterval::from_bounds(-1.0, 1.0));
    st.add(5.0, PredictionInterval::from_bounds(-1.0, 3.0));
    st.add(2.0, PredictionInterval::unbounded(0.0, IntervalFlag::NoAvailableCases));
    CHECK(st.coverage() == doctest::Approx(2.0 / 3.0));
    CHECK(st.mean_length() == doctest::Approx(3.0));
    CHECK(st.n_infinite == 1);
    GroupStats empty;
    CHECK(std::isnan(empty.mean_length()));
}

TEST_CASE("config validation") {
    auto cfg = small_config();
    cfg.alpha = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.sizes.n_calib = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(parse_grouping("by_pattern_size") == Grouping::ByPatternSize);
}

}
