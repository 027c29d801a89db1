#pragma once

#include "cpmiss/conformal.hpp"
#include "cpmiss/core.hpp"
#include "cpmiss/rng.hpp"
#include "cpmiss/synth.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace cpmiss {

enum class Grouping { ByMask, ByPatternSize };

std::string to_string(Grouping g);
Grouping parse_grouping(std::string_view text);

struct SampleSizes {
    std::size_t n_train = 500;
    std::size_t n_calib = 250;
    std::size_t n_test_marginal = 2000;
    std::size_t n_test_per_group = 100;
};

struct ExperimentConfig {
    DgpConfig dgp = DgpConfig::benchmark(3);
    AmputeConfig ampute = AmputeConfig::benchmark(Mechanism::MCAR, 3);
    SampleSizes sizes;
    double alpha = 0.1;
    std::vector<Method> methods{Method::CQR, Method::CqrMdaExact, Method::CP, Method::NexCP, Method::LCP};
    std::size_t reps = 50;
    std::uint64_t master_seed = 0;
    double rho = 0.99;
    Grouping grouping = Grouping::ByMask;
    /// Threads running repetitions; results do not depend on it.
    std::size_t workers = 1;
    /// Rows of the reference sample used to calibrate MAR/MNAR offsets.
    std::size_t pilot_size = 20000;
    /// Complete points drawn per group before the group is declared unreachable.
    std::size_t group_attempt_budget = 5'000'000;
    /// Evaluate the all-missing mask as a group as well.
    bool include_all_missing_group = false;
    /// Keep per-point records in the report.
    bool keep_points = false;

    /// Benchmark layout for dimension d: exact masks for d = 3, pattern sizes otherwise.
    static ExperimentConfig benchmark(std::size_t d, Mechanism mechanism);

    void validate() const;
};

/// Test group: one exact mask, or every mask of a given size.
struct GroupKey {
    enum class Kind { ExactMask, PatternSize };
    Kind kind = Kind::ExactMask;
    Mask mask;
    std::size_t size = 0;

    bool matches(const Mask& m) const;
    /// "[110]" for masks, "size:2" for pattern sizes.
    std::string label() const;
};

/// Label of the marginal (all test points) group.
inline constexpr const char* kMarginalGroup = "mar";

/// Groups evaluated under `cfg`, in report order.
std::vector<GroupKey> experiment_groups(const ExperimentConfig& cfg);

/// Draws complete points from the DGP, applies `amputer` and keeps those whose
/// mask matches `key`, until `count` are accepted. Throws UnreachableGroupError
/// when `budget` draws are exhausted first.
std::vector<MaskedSample> mask_group_sampler(const DgpConfig& dgp, const Amputer& amputer, const GroupKey& key,
                                             std::size_t count, Rng& rng, std::size_t budget,
                                             std::size_t* attempts = nullptr);

struct PointRecord {
    std::uint32_t rep = 0;
    Method method = Method::CP;
    std::string group;
    double y = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    Mask mask;
    IntervalFlag flag = IntervalFlag::None;
};

struct GroupStats {
    std::size_t n_points = 0;
    std::size_t n_covered = 0;
    std::size_t n_infinite = 0;
    double finite_length_sum = 0.0;

    void add(double y, const PredictionInterval& iv);
    void merge(const GroupStats& other);
    double coverage() const;
    /// Mean length over finite intervals; NaN when there are none.
    double mean_length() const;
};

struct EvalReport {
    std::vector<Method> methods;
    /// Group labels in report order, starting with the marginal group.
    std::vector<std::string> groups;
    std::map<std::pair<Method, std::string>, GroupStats> cells;
    std::vector<std::string> warnings;
    std::size_t reps = 0;
    std::vector<PointRecord> points;

    const GroupStats& at(Method m, const std::string& group) const;
    bool has(Method m, const std::string& group) const;
};

/// Mechanism calibrated once per experiment on a pilot sample from its own stream.
Amputer calibrate_experiment_amputer(const ExperimentConfig& cfg);

struct RepetitionSplits {
    MaskedDataset train;
    MaskedDataset calib;
    MaskedDataset test_marginal;
};

/// The three amputed splits of repetition `rep`, each from its own stream.
RepetitionSplits draw_repetition(const ExperimentConfig& cfg, const Amputer& amputer, std::uint64_t rep);

/// Runs every repetition (possibly in parallel) and reduces in repetition order.
EvalReport run_experiment(const ExperimentConfig& cfg);

} // namespace cpmiss
