#pragma once

#include "cpmiss/core.hpp"
#include "cpmiss/metrics.hpp"
#include "cpmiss/models.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cpmiss {

enum class Method { CP, CQR, CqrMdaExact, NexCP, LCP };

std::string to_string(Method m);
Method parse_method(std::string_view text);
/// Methods that need the quantile (CQR-style) pipeline.
bool uses_quantile_pipeline(Method m);

enum class IntervalFlag {
    None,
    /// No calibration sample has a mask preceding the test mask.
    NoAvailableCases,
    /// No training sample has a mask preceding the test mask (localized method).
    NoTrainingAvailableCases,
    /// Every kernel value underflowed; uniform localization weights were used.
    KernelUniformFallback,
};

std::string to_string(IntervalFlag f);

/// [center - half_width, center + half_width]; half_width may be +inf.
struct PredictionInterval {
    double center = 0.0;
    double half_width = 0.0;
    IntervalFlag flag = IntervalFlag::None;

    double lower() const noexcept { return center - half_width; }
    double upper() const noexcept { return center + half_width; }
    bool infinite() const noexcept { return !(half_width < kInf); }
    bool contains(double y) const noexcept { return lower() <= y && y <= upper(); }
    double length() const noexcept { return 2.0 * half_width; }

    /// Interval [lo, hi]; an empty (crossed) interval collapses to its midpoint.
    static PredictionInterval from_bounds(double lo, double hi);
    static PredictionInterval unbounded(double center, IntervalFlag flag);
};

struct ConformalScore {
    double value = 0.0;
    std::size_t source = 0;
};

/// Weights of the nonexchangeable method. Entry i belongs to the i-th
/// available case after sorting by non-increasing distance to the test point.
struct NexcpWeights {
    std::vector<double> raw;
    std::vector<double> normalized;
    double test_raw = 1.0;
    double test_normalized = 0.0;
    double rho = 0.99;
};

/// w_i = rho^(k + 1 - i) (1-based i, k entries) unless the i-th sample shares
/// the test mask, in which case w_i = 1; the test point gets weight 1.
NexcpWeights nexcp_weights(const std::vector<bool>& same_mask_sorted, double rho);

/// Half-width of the nonexchangeable interval from available-case scores,
/// their distances to the test point and same-mask flags (all in calibration
/// order). Sorting is by non-increasing distance, ties kept in input order.
double nexcp_half_width(std::span<const double> scores, std::span<const double> distances,
                        const std::vector<bool>& same_mask, double rho, double alpha,
                        NexcpWeights* weights_out = nullptr);

/// Split-conformal quantile: uniform weights on the scores plus one unit at +inf.
double conformal_quantile(std::span<const double> scores, double alpha);

struct LocalizedScore {
    double base = 0.0;
    double local_quantile = 0.0;
    double adjusted = 0.0;
};

struct EngineSettings {
    double alpha = 0.1;
    double rho = 0.99;
    /// Localization bandwidth; unset means median pairwise HEOM distance over
    /// train and calibration samples.
    std::optional<double> bandwidth;
    /// HEOM normalizing ranges; unset means the training-set ranges.
    std::optional<std::vector<double>> ranges;
};

/// Calibrated interval constructors for one (train, calibration) split.
///
/// Quantities that depend on the test point only through its mask (remasked
/// calibration scores, the localized calibration scores, the CQR-MDA quantile)
/// are cached per mask, so a batch of test points costs little more than the
/// per-point distance work. Not thread-safe; use one engine per thread.
class ConformalEngine {
public:
    /// Either pipeline may be null when the corresponding methods are unused.
    /// Calibration samples must all have responses (DataError otherwise).
    ConformalEngine(const FittedPipeline* mean_pipeline, const FittedPipeline* quantile_pipeline,
                    MaskedDataset train, MaskedDataset calibration, EngineSettings settings);

    PredictionInterval predict(Method method, const MaskedSample& test);

    double bandwidth();
    const std::vector<double>& ranges() const noexcept { return ranges_; }
    const EngineSettings& settings() const noexcept { return settings_; }

    /// Localized scores of the available calibration cases for `mask`, in calibration order.
    const std::vector<LocalizedScore>& localized_calibration_scores(const Mask& mask);

    /// Q_{1-alpha} of the kernel-smoothed score distribution at `x` for `mask`.
    /// Unset when no training sample is available for the mask.
    std::optional<double> local_quantile(const Mask& mask, const MaskedSample& x);

private:
    struct MaskState {
        std::vector<std::size_t> calib_available;
        std::vector<double> calib_scores;
        std::vector<bool> calib_same_mask;

        bool cqr_ready = false;
        double cqr_mda_quantile = 0.0;

        bool lcp_ready = false;
        std::vector<std::size_t> train_available_sorted;  // ordered by remasked score
        std::vector<double> train_scores_sorted;
        std::vector<LocalizedScore> calib_localized;
        double lcp_correction = 0.0;
    };

    const FittedPipeline* mean_;
    const FittedPipeline* quantile_;
    MaskedDataset train_;
    MaskedDataset calib_;
    EngineSettings settings_;
    std::vector<double> ranges_;
    std::optional<double> bandwidth_;
    std::optional<double> cp_quantile_;
    std::optional<double> cqr_quantile_;
    std::map<Mask, MaskState> states_;

    const FittedPipeline& mean_pipeline() const;
    const FittedPipeline& quantile_pipeline() const;
    MaskState& state(const Mask& mask, bool need_mean_scores);
    void prepare_cqr_mda(const Mask& mask, MaskState& st);
    void prepare_lcp(const Mask& mask, MaskState& st);
    double local_quantile_impl(const MaskState& st, const MaskedSample& x, bool* fallback);

    PredictionInterval split_cp(const MaskedSample& test);
    PredictionInterval cqr(const MaskedSample& test);
    PredictionInterval cqr_mda_exact(const MaskedSample& test);
    PredictionInterval nexcp(const MaskedSample& test);
    PredictionInterval lcp(const MaskedSample& test);
};

/// Split conformal: absolute residuals on the calibration set, uniform weights plus +inf.
PredictionInterval split_cp(const FittedPipeline& pipeline, const MaskedDataset& calib, const MaskedSample& test,
                            double alpha);

/// Nonexchangeable conformal prediction with missing covariates.
PredictionInterval nexcp(const FittedPipeline& pipeline, const MaskedDataset& calib, const MaskedSample& test,
                         double alpha, double rho, std::span<const double> ranges);

/// Localized conformal prediction with missing covariates.
PredictionInterval lcp(const FittedPipeline& pipeline, const MaskedDataset& train, const MaskedDataset& calib,
                       const MaskedSample& test, double alpha, const KernelSpec& kernel,
                       std::span<const double> ranges);

/// Conformalized quantile regression on imputed calibration points.
PredictionInterval cqr(const FittedPipeline& quantile_pipeline, const MaskedDataset& calib, const MaskedSample& test,
                       double alpha);

/// CQR restricted to available cases remasked to the test mask, equal weights.
PredictionInterval cqr_mda_exact(const FittedPipeline& quantile_pipeline, const MaskedDataset& calib,
                                 const MaskedSample& test, double alpha);

} // namespace cpmiss
