#include "cpmiss/harness.hpp"

#include "cpmiss/error.hpp"
#include "cpmiss/models.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

namespace cpmiss {

std::string to_string(Grouping g) {
    return g == Grouping::ByMask ? "by_mask" : "by_pattern_size";
}

Grouping parse_grouping(std::string_view text) {
    if (text == "by_mask" || text == "mask") return Grouping::ByMask;
    if (text == "by_pattern_size" || text == "pattern_size" || text == "size") return Grouping::ByPatternSize;
    throw ConfigError("unknown grouping '" + std::string(text) + "'");
}

ExperimentConfig ExperimentConfig::benchmark(std::size_t d, Mechanism mechanism) {
    ExperimentConfig cfg;
    cfg.dgp = DgpConfig::benchmark(d);
    cfg.ampute = AmputeConfig::benchmark(mechanism, d);
    cfg.grouping = d <= 3 ? Grouping::ByMask : Grouping::ByPatternSize;
    return cfg;
}

void ExperimentConfig::validate() const {
    dgp.validate();
    ampute.validate(dgp.d);
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
    if (sizes.n_train == 0 || sizes.n_calib == 0 || sizes.n_test_marginal == 0 || sizes.n_test_per_group == 0) {
        throw ConfigError("sample sizes must be >= 1");
    }
    if (reps == 0) throw ConfigError("reps must be >= 1");
    if (methods.empty()) throw ConfigError("at least one method is required");
    if (workers == 0) throw ConfigError("workers must be >= 1");
    if (pilot_size == 0) throw ConfigError("pilot_size must be >= 1");
}

bool GroupKey::matches(const Mask& m) const {
    return kind == Kind::ExactMask ? m == mask : m.count() == size;
}

std::string GroupKey::label() const {
    return kind == Kind::ExactMask ? "[" + mask.str() + "]" : "size:" + std::to_string(size);
}

std::vector<GroupKey> experiment_groups(const ExperimentConfig& cfg) {
    const std::size_t d = cfg.dgp.d;
    const auto& maskable = cfg.ampute.maskable_columns;
    std::vector<GroupKey> groups;
    if (cfg.grouping == Grouping::ByMask) {
        if (maskable.size() > 20) throw ConfigError("by_mask grouping supports at most 20 maskable columns");
        std::vector<Mask> masks;
        for (std::size_t bits = 0; bits < (std::size_t{1} << maskable.size()); ++bits) {
            Mask m(d);
            for (std::size_t k = 0; k < maskable.size(); ++k) {
                if (bits & (std::size_t{1} << k)) m.set_missing(maskable[k], true);
            }
            if (m.all_missing() && !cfg.include_all_missing_group) continue;
            masks.push_back(std::move(m));
        }
        std::sort(masks.begin(), masks.end());
        for (auto& m : masks) {
            GroupKey g;
            g.kind = GroupKey::Kind::ExactMask;
            g.mask = std::move(m);
            groups.push_back(std::move(g));
        }
    } else {
        std::size_t max_size = maskable.size();
        if (max_size == d && !cfg.include_all_missing_group) max_size = d - 1;
        for (std::size_t s = 0; s <= max_size; ++s) {
            GroupKey g;
            g.kind = GroupKey::Kind::PatternSize;
            g.size = s;
            groups.push_back(std::move(g));
        }
    }
    return groups;
}

std::vector<MaskedSample> mask_group_sampler(const DgpConfig& dgp, const Amputer& amputer, const GroupKey& key,
                                             std::size_t count, Rng& rng, std::size_t budget,
                                             std::size_t* attempts) {
    std::vector<MaskedSample> out;
    out.reserve(count);
    std::size_t drawn = 0;
    std::vector<double> row(dgp.d);
    while (out.size() < count) {
        if (drawn >= budget) {
            if (attempts) *attempts = drawn;
            throw UnreachableGroupError("group " + key.label() + ": accepted " + std::to_string(out.size()) + " of " +
                                        std::to_string(count) + " points after " + std::to_string(drawn) + " draws");
        }
        const std::size_t batch = std::min<std::size_t>(4096, budget - drawn);
        const CompleteData data = gen_gaussian_linear(dgp, batch, rng);
        for (Eigen::Index i = 0; i < data.X.rows() && out.size() < count; ++i) {
            ++drawn;
            const Eigen::VectorXd x = data.X.row(i).transpose();
            const Mask m = amputer.draw_mask(x, rng);
            if (!key.matches(m)) continue;
            std::copy(x.data(), x.data() + x.size(), row.begin());
            out.push_back(MaskedSample::from_complete(row, m, data.y(i)));
        }
    }
    if (attempts) *attempts = drawn;
    return out;
}

void GroupStats::add(double y, const PredictionInterval& iv) {
    ++n_points;
    if (iv.contains(y)) ++n_covered;
    if (iv.infinite()) {
        ++n_infinite;
    } else {
        finite_length_sum += iv.upper() - iv.lower();
    }
}

void GroupStats::merge(const GroupStats& other) {
    n_points += other.n_points;
    n_covered += other.n_covered;
    n_infinite += other.n_infinite;
    finite_length_sum += other.finite_length_sum;
}

double GroupStats::coverage() const {
    return n_points == 0 ? std::numeric_limits<double>::quiet_NaN()
                         : static_cast<double>(n_covered) / static_cast<double>(n_points);
}

double GroupStats::mean_length() const {
    const std::size_t finite = n_points - n_infinite;
    return finite == 0 ? std::numeric_limits<double>::quiet_NaN()
                       : finite_length_sum / static_cast<double>(finite);
}

const GroupStats& EvalReport::at(Method m, const std::string& group) const {
    auto it = cells.find({m, group});
    if (it == cells.end()) throw DataError("report has no cell for " + to_string(m) + " / " + group);
    return it->second;
}

bool EvalReport::has(Method m, const std::string& group) const { return cells.count({m, group}) != 0; }

namespace {

MaskedDataset draw_split(const ExperimentConfig& cfg, const Amputer& amputer, std::size_t n, std::uint64_t rep,
                         StreamPurpose purpose) {
    Rng data_rng = make_stream(cfg.master_seed, rep, purpose, 0);
    Rng mask_rng = make_stream(cfg.master_seed, rep, purpose, 1);
    const CompleteData data = gen_gaussian_linear(cfg.dgp, n, data_rng);
    return amputer.apply(data.X, &data.y, mask_rng);
}

} // namespace

Amputer calibrate_experiment_amputer(const ExperimentConfig& cfg) {
    Rng pilot_rng = make_stream(cfg.master_seed, std::numeric_limits<std::uint64_t>::max(),
                                StreamPurpose::AmputationPilot);
    const CompleteData pilot = gen_gaussian_linear(cfg.dgp, cfg.pilot_size, pilot_rng);
    return Amputer::calibrate(pilot.X, cfg.ampute);
}

RepetitionSplits draw_repetition(const ExperimentConfig& cfg, const Amputer& amputer, std::uint64_t rep) {
    return {draw_split(cfg, amputer, cfg.sizes.n_train, rep, StreamPurpose::Train),
            draw_split(cfg, amputer, cfg.sizes.n_calib, rep, StreamPurpose::Calibration),
            draw_split(cfg, amputer, cfg.sizes.n_test_marginal, rep, StreamPurpose::TestMarginal)};
}

namespace {

struct RepResult {
    std::map<std::pair<Method, std::string>, GroupStats> cells;
    std::vector<std::string> warnings;
    std::vector<PointRecord> points;
};

RepResult run_repetition(const ExperimentConfig& cfg, const Amputer& amputer, const std::vector<GroupKey>& groups,
                         std::uint64_t rep) {
    RepResult out;
    const RepetitionSplits splits = draw_repetition(cfg, amputer, rep);
    const MaskedDataset& train = splits.train;
    const MaskedDataset& calib = splits.calib;

    const bool need_mean = std::any_of(cfg.methods.begin(), cfg.methods.end(),
                                       [](Method m) { return !uses_quantile_pipeline(m); });
    const bool need_quantile = std::any_of(cfg.methods.begin(), cfg.methods.end(), uses_quantile_pipeline);
    std::optional<FittedPipeline> mean_pipe;
    std::optional<FittedPipeline> quantile_pipe;
    if (need_mean) mean_pipe = fit_pipeline(train, RegressorKind::LeastSquares, cfg.alpha);
    if (need_quantile) quantile_pipe = fit_pipeline(train, RegressorKind::QuantilePair, cfg.alpha);

    EngineSettings settings;
    settings.alpha = cfg.alpha;
    settings.rho = cfg.rho;
    ConformalEngine engine(mean_pipe ? &*mean_pipe : nullptr, quantile_pipe ? &*quantile_pipe : nullptr, train, calib,
                           settings);

    auto evaluate = [&](const std::vector<MaskedSample>& points, const std::string& label) {
        for (Method m : cfg.methods) {
            auto& stats = out.cells[{m, label}];
            for (const auto& s : points) {
                const PredictionInterval iv = engine.predict(m, s);
                stats.add(*s.y(), iv);
                if (cfg.keep_points) {
                    PointRecord r;
                    r.rep = static_cast<std::uint32_t>(rep);
                    r.method = m;
                    r.group = label;
                    r.y = *s.y();
                    r.lower = iv.lower();
                    r.upper = iv.upper();
                    r.mask = s.mask();
                    r.flag = iv.flag;
                    out.points.push_back(std::move(r));
                }
            }
        }
    };

    evaluate(splits.test_marginal.samples(), kMarginalGroup);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        Rng rng = make_stream(cfg.master_seed, rep, StreamPurpose::TestGroup, g);
        std::vector<MaskedSample> points;
        try {
            points = mask_group_sampler(cfg.dgp, amputer, groups[g], cfg.sizes.n_test_per_group, rng,
                                        cfg.group_attempt_budget);
        } catch (const UnreachableGroupError&) {
            out.warnings.push_back("group " + groups[g].label() + " dropped: fewer than " +
                                   std::to_string(cfg.sizes.n_test_per_group) + " matching points within " +
                                   std::to_string(cfg.group_attempt_budget) + " draws");
            continue;
        }
        evaluate(points, groups[g].label());
    }
    return out;
}

} // namespace

EvalReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto groups = experiment_groups(cfg);

    const Amputer amputer = calibrate_experiment_amputer(cfg);

    std::vector<std::optional<RepResult>> results(cfg.reps);
    std::vector<std::exception_ptr> errors(cfg.reps);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r = next++; r < cfg.reps; r = next++) {
            try {
                results[r] = run_repetition(cfg, amputer, groups, r);
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::min(cfg.workers, cfg.reps);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    EvalReport report;
    report.methods = cfg.methods;
    report.reps = cfg.reps;
    report.groups.push_back(kMarginalGroup);
    for (const auto& g : groups) report.groups.push_back(g.label());

    std::set<std::string> seen_warnings;
    for (auto& res : results) {
        for (const auto& [key, stats] : res->cells) report.cells[key].merge(stats);
        for (auto& w : res->warnings) {
            if (seen_warnings.insert(w).second) report.warnings.push_back(w);
        }
        if (cfg.keep_points) {
            report.points.insert(report.points.end(), std::make_move_iterator(res->points.begin()),
                                 std::make_move_iterator(res->points.end()));
        }
    }
    // Groups never realized in any repetition are dropped from the ordering.
    std::erase_if(report.groups, [&](const std::string& g) {
        return std::none_of(cfg.methods.begin(), cfg.methods.end(), [&](Method m) { return report.has(m, g); });
    });
    return report;
}

} // namespace cpmiss
