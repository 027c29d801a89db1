#include "cpmiss/conformal.hpp"

#include "cpmiss/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace cpmiss {

std::string to_string(Method m) {
    switch (m) {
    case Method::CP: return "cp";
    case Method::CQR: return "cqr";
    case Method::CqrMdaExact: return "cqr_mda_exact";
    case Method::NexCP: return "nexcp";
    case Method::LCP: return "lcp";
    }
    return "?";
}

Method parse_method(std::string_view text) {
    std::string s;
    for (char c : text) {
        s.push_back(c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (s == "cp") return Method::CP;
    if (s == "cqr") return Method::CQR;
    if (s == "cqr_mda_exact") return Method::CqrMdaExact;
    if (s == "nexcp") return Method::NexCP;
    if (s == "lcp") return Method::LCP;
    throw ConfigError("unknown method '" + std::string(text) + "'");
}

bool uses_quantile_pipeline(Method m) { return m == Method::CQR || m == Method::CqrMdaExact; }

std::string to_string(IntervalFlag f) {
    switch (f) {
    case IntervalFlag::None: return "";
    case IntervalFlag::NoAvailableCases: return "no_available_cases";
    case IntervalFlag::NoTrainingAvailableCases: return "no_training_available_cases";
    case IntervalFlag::KernelUniformFallback: return "kernel_uniform_fallback";
    }
    return "?";
}

PredictionInterval PredictionInterval::from_bounds(double lo, double hi) {
    PredictionInterval iv;
    iv.center = 0.5 * (lo + hi);
    iv.half_width = std::max(0.0, 0.5 * (hi - lo));
    return iv;
}

PredictionInterval PredictionInterval::unbounded(double center, IntervalFlag flag) {
    PredictionInterval iv;
    iv.center = center;
    iv.half_width = kInf;
    iv.flag = flag;
    return iv;
}

NexcpWeights nexcp_weights(const std::vector<bool>& same_mask_sorted, double rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
    const std::size_t k = same_mask_sorted.size();
    NexcpWeights w;
    w.rho = rho;
    w.raw.resize(k);
    double total = w.test_raw;
    for (std::size_t i = 0; i < k; ++i) {
        // 1-based position i+1 gets rho^(k + 1 - (i + 1))
        w.raw[i] = same_mask_sorted[i] ? 1.0 : std::pow(rho, static_cast<double>(k - i));
        total += w.raw[i];
    }
    w.normalized.resize(k);
    for (std::size_t i = 0; i < k; ++i) w.normalized[i] = w.raw[i] / total;
    w.test_normalized = w.test_raw / total;
    return w;
}

double nexcp_half_width(std::span<const double> scores, std::span<const double> distances,
                        const std::vector<bool>& same_mask, double rho, double alpha, NexcpWeights* weights_out) {
    const std::size_t k = scores.size();
    if (distances.size() != k || same_mask.size() != k) {
        throw DimensionError("nexcp_half_width: scores, distances and flags differ in length");
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return distances[a] > distances[b]; });

    std::vector<bool> same_sorted(k);
    for (std::size_t i = 0; i < k; ++i) same_sorted[i] = same_mask[order[i]];
    NexcpWeights w = nexcp_weights(same_sorted, rho);

    WeightedEmpirical dist;
    dist.atoms.reserve(k);
    for (std::size_t i = 0; i < k; ++i) dist.atoms.push_back({scores[order[i]], w.normalized[i]});
    dist.inf_mass = w.test_normalized;
    const double q = weighted_quantile(dist, 1.0 - alpha);
    if (weights_out) *weights_out = std::move(w);
    return q;
}

double conformal_quantile(std::span<const double> scores, double alpha) {
    return weighted_quantile(WeightedEmpirical::uniform_with_inf(scores), 1.0 - alpha);
}

ConformalEngine::ConformalEngine(const FittedPipeline* mean_pipeline, const FittedPipeline* quantile_pipeline,
                                 MaskedDataset train, MaskedDataset calibration, EngineSettings settings)
    : mean_(mean_pipeline), quantile_(quantile_pipeline), train_(std::move(train)), calib_(std::move(calibration)),
      settings_(std::move(settings)) {
    if (!(settings_.alpha > 0.0 && settings_.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (!(settings_.rho > 0.0 && settings_.rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
    if (!calib_.has_responses()) throw DataError("calibration samples must all have responses");
    if (!train_.empty() && train_.dim() != calib_.dim()) {
        throw DimensionError("training and calibration sets differ in dimension");
    }
    if (settings_.bandwidth && !(*settings_.bandwidth > 0.0)) {
        throw ConfigError("kernel bandwidth must be positive");
    }
    if (settings_.ranges) {
        ranges_ = *settings_.ranges;
    } else {
        ranges_ = train_.empty() ? calib_.ranges() : train_.ranges();
    }
    if (ranges_.size() != calib_.dim()) throw DimensionError("ranges length does not match the dimension");
}

const FittedPipeline& ConformalEngine::mean_pipeline() const {
    if (!mean_) throw ConfigError("method needs a least-squares pipeline");
    return *mean_;
}

const FittedPipeline& ConformalEngine::quantile_pipeline() const {
    if (!quantile_) throw ConfigError("method needs a quantile pipeline");
    return *quantile_;
}

double ConformalEngine::bandwidth() {
    if (!bandwidth_) {
        if (settings_.bandwidth) {
            bandwidth_ = *settings_.bandwidth;
        } else {
            std::vector<MaskedSample> pool;
            pool.reserve(train_.size() + calib_.size());
            pool.insert(pool.end(), train_.begin(), train_.end());
            pool.insert(pool.end(), calib_.begin(), calib_.end());
            bandwidth_ = median_pairwise_bandwidth(pool, ranges_);
        }
    }
    return *bandwidth_;
}

ConformalEngine::MaskState& ConformalEngine::state(const Mask& mask, bool need_mean_scores) {
    if (mask.size() != calib_.dim()) throw DimensionError("test mask does not match the calibration dimension");
    auto [it, inserted] = states_.try_emplace(mask);
    MaskState& st = it->second;
    if (inserted) {
        st.calib_available = available_cases(calib_, mask);
        st.calib_same_mask.resize(st.calib_available.size());
        for (std::size_t k = 0; k < st.calib_available.size(); ++k) {
            st.calib_same_mask[k] = calib_[st.calib_available[k]].mask() == mask;
        }
    }
    if (need_mean_scores && st.calib_scores.size() != st.calib_available.size()) {
        const auto& pipe = mean_pipeline();
        st.calib_scores.resize(st.calib_available.size());
        for (std::size_t k = 0; k < st.calib_available.size(); ++k) {
            const auto& s = calib_[st.calib_available[k]];
            st.calib_scores[k] = std::abs(*s.y() - pipe.predict(remask(s, mask)));
        }
    }
    return st;
}

void ConformalEngine::prepare_cqr_mda(const Mask& mask, MaskState& st) {
    if (st.cqr_ready) return;
    const auto& pipe = quantile_pipeline();
    std::vector<double> scores(st.calib_available.size());
    for (std::size_t k = 0; k < st.calib_available.size(); ++k) {
        const auto& s = calib_[st.calib_available[k]];
        const auto [lo, hi] = pipe.predict_quantiles(remask(s, mask));
        scores[k] = std::max(lo - *s.y(), *s.y() - hi);
    }
    st.cqr_mda_quantile = conformal_quantile(scores, settings_.alpha);
    st.cqr_ready = true;
}

double ConformalEngine::local_quantile_impl(const MaskState& st, const MaskedSample& x, bool* fallback) {
    const std::size_t m = st.train_available_sorted.size();
    std::vector<double> distances(m);
    for (std::size_t j = 0; j < m; ++j) {
        distances[j] = heom_distance(train_[st.train_available_sorted[j]], x, ranges_);
    }
    KernelSpec kernel;
    kernel.bandwidth = bandwidth();
    const KernelWeights w = kernel_weights_from_distances(distances, kernel);
    if (fallback) *fallback = w.uniform_fallback;
    return weighted_quantile_sorted(st.train_scores_sorted, w.weights, 0.0, 1.0 - settings_.alpha);
}

void ConformalEngine::prepare_lcp(const Mask& mask, MaskState& st) {
    if (st.lcp_ready) return;
    const auto& pipe = mean_pipeline();
    const auto train_avail = train_.empty() ? std::vector<std::size_t>{} : available_cases(train_, mask);
    std::vector<double> scores(train_avail.size());
    for (std::size_t k = 0; k < train_avail.size(); ++k) {
        const auto& s = train_[train_avail[k]];
        if (!s.y()) throw DataError("localized method needs responses on the training set");
        scores[k] = std::abs(*s.y() - pipe.predict(remask(s, mask)));
    }
    std::vector<std::size_t> order(train_avail.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    st.train_available_sorted.resize(order.size());
    st.train_scores_sorted.resize(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        st.train_available_sorted[k] = train_avail[order[k]];
        st.train_scores_sorted[k] = scores[order[k]];
    }

    st.calib_localized.clear();
    if (!st.train_available_sorted.empty()) {
        std::vector<double> adjusted;
        adjusted.reserve(st.calib_available.size());
        for (std::size_t k = 0; k < st.calib_available.size(); ++k) {
            LocalizedScore ls;
            ls.base = st.calib_scores[k];
            ls.local_quantile = local_quantile_impl(st, calib_[st.calib_available[k]], nullptr);
            ls.adjusted = ls.base - ls.local_quantile;
            st.calib_localized.push_back(ls);
            adjusted.push_back(ls.adjusted);
        }
        st.lcp_correction = conformal_quantile(adjusted, settings_.alpha);
    }
    st.lcp_ready = true;
}

const std::vector<LocalizedScore>& ConformalEngine::localized_calibration_scores(const Mask& mask) {
    auto& st = state(mask, true);
    prepare_lcp(mask, st);
    return st.calib_localized;
}

std::optional<double> ConformalEngine::local_quantile(const Mask& mask, const MaskedSample& x) {
    auto& st = state(mask, true);
    prepare_lcp(mask, st);
    if (st.train_available_sorted.empty()) return std::nullopt;
    return local_quantile_impl(st, x, nullptr);
}

PredictionInterval ConformalEngine::predict(Method method, const MaskedSample& test) {
    if (test.dim() != calib_.dim()) throw DimensionError("test sample dimension does not match calibration set");
    switch (method) {
    case Method::CP: return split_cp(test);
    case Method::CQR: return cqr(test);
    case Method::CqrMdaExact: return cqr_mda_exact(test);
    case Method::NexCP: return nexcp(test);
    case Method::LCP: return lcp(test);
    }
    throw ConfigError("unknown method");
}

PredictionInterval ConformalEngine::split_cp(const MaskedSample& test) {
    const auto& pipe = mean_pipeline();
    if (!cp_quantile_) {
        std::vector<double> scores(calib_.size());
        for (std::size_t i = 0; i < calib_.size(); ++i) {
            scores[i] = std::abs(*calib_[i].y() - pipe.predict(calib_[i]));
        }
        cp_quantile_ = conformal_quantile(scores, settings_.alpha);
    }
    PredictionInterval iv;
    iv.center = pipe.predict(test);
    iv.half_width = *cp_quantile_;
    return iv;
}

PredictionInterval ConformalEngine::cqr(const MaskedSample& test) {
    const auto& pipe = quantile_pipeline();
    if (!cqr_quantile_) {
        std::vector<double> scores(calib_.size());
        for (std::size_t i = 0; i < calib_.size(); ++i) {
            const auto [lo, hi] = pipe.predict_quantiles(calib_[i]);
            const double y = *calib_[i].y();
            scores[i] = std::max(lo - y, y - hi);
        }
        cqr_quantile_ = conformal_quantile(scores, settings_.alpha);
    }
    const auto [lo, hi] = pipe.predict_quantiles(test);
    if (std::isinf(*cqr_quantile_)) return PredictionInterval::unbounded(0.5 * (lo + hi), IntervalFlag::None);
    return PredictionInterval::from_bounds(lo - *cqr_quantile_, hi + *cqr_quantile_);
}

PredictionInterval ConformalEngine::cqr_mda_exact(const MaskedSample& test) {
    const auto& pipe = quantile_pipeline();
    auto& st = state(test.mask(), false);
    const auto [lo, hi] = pipe.predict_quantiles(test);
    if (st.calib_available.empty()) {
        return PredictionInterval::unbounded(0.5 * (lo + hi), IntervalFlag::NoAvailableCases);
    }
    prepare_cqr_mda(test.mask(), st);
    if (std::isinf(st.cqr_mda_quantile)) return PredictionInterval::unbounded(0.5 * (lo + hi), IntervalFlag::None);
    return PredictionInterval::from_bounds(lo - st.cqr_mda_quantile, hi + st.cqr_mda_quantile);
}

PredictionInterval ConformalEngine::nexcp(const MaskedSample& test) {
    const auto& pipe = mean_pipeline();
    auto& st = state(test.mask(), true);
    const double center = pipe.predict(test);
    if (st.calib_available.empty()) return PredictionInterval::unbounded(center, IntervalFlag::NoAvailableCases);

    std::vector<double> distances(st.calib_available.size());
    for (std::size_t k = 0; k < st.calib_available.size(); ++k) {
        distances[k] = heom_distance(calib_[st.calib_available[k]], test, ranges_);
    }
    PredictionInterval iv;
    iv.center = center;
    iv.half_width = nexcp_half_width(st.calib_scores, distances, st.calib_same_mask, settings_.rho, settings_.alpha);
    return iv;
}

PredictionInterval ConformalEngine::lcp(const MaskedSample& test) {
    const auto& pipe = mean_pipeline();
    auto& st = state(test.mask(), true);
    prepare_lcp(test.mask(), st);
    const double center = pipe.predict(test);
    if (st.train_available_sorted.empty()) {
        return PredictionInterval::unbounded(center, IntervalFlag::NoTrainingAvailableCases);
    }
    if (st.calib_available.empty()) return PredictionInterval::unbounded(center, IntervalFlag::NoAvailableCases);

    bool fallback = false;
    const double local = local_quantile_impl(st, test, &fallback);
    PredictionInterval iv;
    iv.center = center;
    iv.half_width = std::max(0.0, local + st.lcp_correction);
    if (fallback) iv.flag = IntervalFlag::KernelUniformFallback;
    return iv;
}

PredictionInterval split_cp(const FittedPipeline& pipeline, const MaskedDataset& calib, const MaskedSample& test,
                            double alpha) {
    EngineSettings s;
    s.alpha = alpha;
    ConformalEngine engine(&pipeline, nullptr, MaskedDataset(calib.dim()), calib, s);
    return engine.predict(Method::CP, test);
}

PredictionInterval nexcp(const FittedPipeline& pipeline, const MaskedDataset& calib, const MaskedSample& test,
                         double alpha, double rho, std::span<const double> ranges) {
    EngineSettings s;
    s.alpha = alpha;
    s.rho = rho;
    s.ranges = std::vector<double>(ranges.begin(), ranges.end());
    ConformalEngine engine(&pipeline, nullptr, MaskedDataset(calib.dim()), calib, s);
    return engine.predict(Method::NexCP, test);
}

PredictionInterval lcp(const FittedPipeline& pipeline, const MaskedDataset& train, const MaskedDataset& calib,
                       const MaskedSample& test, double alpha, const KernelSpec& kernel,
                       std::span<const double> ranges) {
    if (!(kernel.bandwidth > 0.0)) throw ConfigError("kernel bandwidth must be positive");
    EngineSettings s;
    s.alpha = alpha;
    s.bandwidth = kernel.bandwidth;
    s.ranges = std::vector<double>(ranges.begin(), ranges.end());
    ConformalEngine engine(&pipeline, nullptr, train, calib, s);
    return engine.predict(Method::LCP, test);
}

PredictionInterval cqr(const FittedPipeline& quantile_pipeline, const MaskedDataset& calib, const MaskedSample& test,
                       double alpha) {
    EngineSettings s;
    s.alpha = alpha;
    ConformalEngine engine(nullptr, &quantile_pipeline, MaskedDataset(calib.dim()), calib, s);
    return engine.predict(Method::CQR, test);
}

PredictionInterval cqr_mda_exact(const FittedPipeline& quantile_pipeline, const MaskedDataset& calib,
                                 const MaskedSample& test, double alpha) {
    EngineSettings s;
    s.alpha = alpha;
    ConformalEngine engine(nullptr, &quantile_pipeline, MaskedDataset(calib.dim()), calib, s);
    return engine.predict(Method::CqrMdaExact, test);
}

} // namespace cpmiss
