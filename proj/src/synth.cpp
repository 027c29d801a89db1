#include "cpmiss/synth.hpp"

#include "cpmiss/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace cpmiss {

namespace {

constexpr double kBenchmarkBeta[] = {1.0, 2.0, -1.0, 3.0, -0.5, -1.0, 0.3, 1.7};

double logistic(double t) {
    if (t >= 0.0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

} // namespace

DgpConfig DgpConfig::benchmark(std::size_t d) {
    if (d == 0 || d > std::size(kBenchmarkBeta)) {
        throw ConfigError("benchmark DGP is defined for 1 <= d <= 8");
    }
    DgpConfig cfg;
    cfg.d = d;
    cfg.beta.assign(std::begin(kBenchmarkBeta), std::begin(kBenchmarkBeta) + static_cast<std::ptrdiff_t>(d));
    cfg.mu.assign(d, 1.0);
    return cfg;
}

Eigen::MatrixXd DgpConfig::covariance() const {
    const auto n = static_cast<Eigen::Index>(d);
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(n, n, phi);
    sigma.diagonal().setConstant(1.0);
    return sigma;
}

void DgpConfig::validate() const {
    if (d == 0) throw ConfigError("dgp: d must be positive");
    if (beta.size() != d) throw ConfigError("dgp: beta must have d entries");
    if (mu.size() != d) throw ConfigError("dgp: mu must have d entries");
    if (!(phi >= 0.0 && phi < 1.0)) throw ConfigError("dgp: phi must lie in [0, 1)");
    if (!(noise_sd > 0.0)) throw ConfigError("dgp: noise_sd must be positive");
}

CompleteData gen_gaussian_linear(const DgpConfig& cfg, std::size_t n, Rng& rng) {
    cfg.validate();
    if (n == 0) throw ConfigError("gen_gaussian_linear: n must be >= 1");

    Eigen::LLT<Eigen::MatrixXd> llt(cfg.covariance());
    if (llt.info() != Eigen::Success) {
        throw ConfigError("dgp: covariance is not positive definite");
    }
    const Eigen::MatrixXd L = llt.matrixL();
    const auto d = static_cast<Eigen::Index>(cfg.d);
    const Eigen::Map<const Eigen::VectorXd> mu(cfg.mu.data(), d);
    const Eigen::Map<const Eigen::VectorXd> beta(cfg.beta.data(), d);

    CompleteData out;
    out.X.resize(static_cast<Eigen::Index>(n), d);
    out.y.resize(static_cast<Eigen::Index>(n));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(d);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
        for (Eigen::Index j = 0; j < d; ++j) z(j) = normal(rng);
        const Eigen::VectorXd x = mu + L * z;
        out.X.row(i) = x.transpose();
        out.y(i) = beta.dot(x) + cfg.noise_sd * normal(rng);
    }
    return out;
}

std::string to_string(Mechanism m) {
    switch (m) {
    case Mechanism::MCAR: return "MCAR";
    case Mechanism::MAR: return "MAR";
    case Mechanism::MNAR: return "MNAR";
    }
    return "?";
}

Mechanism parse_mechanism(std::string_view text) {
    std::string s(text);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    if (s == "MCAR") return Mechanism::MCAR;
    if (s == "MAR") return Mechanism::MAR;
    if (s == "MNAR") return Mechanism::MNAR;
    throw ConfigError("unknown missingness mechanism '" + std::string(text) + "'");
}

AmputeConfig AmputeConfig::benchmark(Mechanism mechanism, std::size_t d, double rate) {
    AmputeConfig cfg;
    cfg.mechanism = mechanism;
    cfg.rate = rate;
    if (mechanism == Mechanism::MAR) {
        const std::size_t k = d <= 5 ? 2 : 3;
        if (d <= k) throw ConfigError("MAR benchmark layout needs at least one always-observed column");
        for (std::size_t j = d - k; j < d; ++j) cfg.maskable_columns.push_back(j);
    } else {
        for (std::size_t j = 0; j < d; ++j) cfg.maskable_columns.push_back(j);
    }
    return cfg;
}

void AmputeConfig::validate(std::size_t d) const {
    if (!(rate > 0.0 && rate < 1.0)) throw ConfigError("ampute: rate must lie in (0, 1)");
    if (!(mnar_steepness > 0.0)) throw ConfigError("ampute: mnar_steepness must be positive");
    std::vector<bool> seen(d, false);
    for (auto j : maskable_columns) {
        if (j >= d) throw ConfigError("ampute: maskable column " + std::to_string(j) + " out of range");
        if (seen[j]) throw ConfigError("ampute: duplicate maskable column " + std::to_string(j));
        seen[j] = true;
    }
    if (mechanism == Mechanism::MAR && maskable_columns.size() == d) {
        throw ConfigError("ampute: MAR needs at least one always-observed column");
    }
}

double Amputer::linear_driver(const Eigen::Ref<const Eigen::VectorXd>& row) const {
    if (drivers_.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t k = 0; k < drivers_.size(); ++k) {
        s += (row(static_cast<Eigen::Index>(drivers_[k])) - driver_mean_[k]) / driver_sd_[k];
    }
    return s / std::sqrt(static_cast<double>(drivers_.size()));
}

Amputer Amputer::calibrate(const Eigen::MatrixXd& reference, const AmputeConfig& cfg) {
    const auto d = static_cast<std::size_t>(reference.cols());
    cfg.validate(d);
    if (reference.rows() == 0) throw ConfigError("ampute: empty reference sample");

    Amputer a;
    a.cfg_ = cfg;
    a.d_ = d;
    a.maskable_.assign(d, false);
    for (auto j : cfg.maskable_columns) a.maskable_[j] = true;
    a.offsets_.assign(d, 0.0);

    if (cfg.mechanism == Mechanism::MCAR) return a;

    const Eigen::Index n = reference.rows();
    if (cfg.mechanism == Mechanism::MAR) {
        for (std::size_t k = 0; k < d; ++k) {
            if (a.maskable_[k]) continue;
            const auto col = reference.col(static_cast<Eigen::Index>(k));
            const double mean = col.mean();
            const double var = (col.array() - mean).square().sum() / static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
            a.drivers_.push_back(k);
            a.driver_mean_.push_back(mean);
            a.driver_sd_.push_back(var > 0.0 ? std::sqrt(var) : 1.0);
        }
    }

    std::vector<double> mar_driver;
    if (cfg.mechanism == Mechanism::MAR) {
        mar_driver.resize(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            mar_driver[static_cast<std::size_t>(i)] = a.linear_driver(reference.row(i).transpose());
        }
    }
    // Mean missing probability of column j as a function of its offset.
    auto mean_rate = [&](std::size_t j, double offset) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double t;
            if (cfg.mechanism == Mechanism::MAR) {
                t = offset + mar_driver[static_cast<std::size_t>(i)];
            } else {
                t = cfg.mnar_steepness * (reference(i, static_cast<Eigen::Index>(j)) - offset);
            }
            total += logistic(t);
        }
        return total / static_cast<double>(n);
    };
    // MAR: rate increases with the offset; MNAR: rate decreases with it.
    const double sign = cfg.mechanism == Mechanism::MAR ? 1.0 : -1.0;

    for (auto j : cfg.maskable_columns) {
        auto excess = [&](double b) { return sign * (mean_rate(j, b) - cfg.rate); };
        double lo = -1.0;
        double hi = 1.0;
        while (excess(lo) > 0.0 && lo > -1e3) lo *= 2.0;
        while (excess(hi) < 0.0 && hi < 1e3) hi *= 2.0;
        if (excess(lo) > 0.0 || excess(hi) < 0.0) {
            std::ostringstream msg;
            msg << "ampute: could not bracket offset for column " << j << " (rate " << cfg.rate
                << ", achievable range [" << mean_rate(j, sign > 0 ? lo : hi) << ", "
                << mean_rate(j, sign > 0 ? hi : lo) << "])";
            throw CalibrationError(msg.str());
        }
        double mid = 0.5 * (lo + hi);
        for (int it = 0; it < 200; ++it) {
            mid = 0.5 * (lo + hi);
            const double e = excess(mid);
            if (std::abs(e) < 1e-12) break;
            if (e < 0.0) lo = mid; else hi = mid;
        }
        const double achieved = mean_rate(j, mid);
        if (std::abs(achieved - cfg.rate) > 1e-6) {
            std::ostringstream msg;
            msg << "ampute: calibration for column " << j << " stopped at rate " << achieved << " (target "
                << cfg.rate << ")";
            throw CalibrationError(msg.str());
        }
        a.offsets_[j] = mid;
    }
    return a;
}

double Amputer::missing_probability(const Eigen::Ref<const Eigen::VectorXd>& row, std::size_t j) const {
    if (!maskable_.at(j)) return 0.0;
    switch (cfg_.mechanism) {
    case Mechanism::MCAR:
        return cfg_.rate;
    case Mechanism::MAR:
        return logistic(offsets_[j] + linear_driver(row));
    case Mechanism::MNAR:
        return logistic(cfg_.mnar_steepness * (row(static_cast<Eigen::Index>(j)) - offsets_[j]));
    }
    return 0.0;
}

Mask Amputer::draw_mask(const Eigen::Ref<const Eigen::VectorXd>& row, Rng& rng) const {
    if (static_cast<std::size_t>(row.size()) != d_) throw DimensionError("draw_mask: row dimension mismatch");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Mask m(d_);
    for (std::size_t j = 0; j < d_; ++j) {
        if (!maskable_[j]) continue;
        const double u = unif(rng);
        m.set_missing(j, u < missing_probability(row, j));
    }
    return m;
}

MaskedDataset Amputer::apply(const Eigen::MatrixXd& X, const Eigen::VectorXd* y, Rng& rng) const {
    if (static_cast<std::size_t>(X.cols()) != d_) throw DimensionError("ampute: column count mismatch");
    if (y && y->size() != X.rows()) throw DimensionError("ampute: response length mismatch");
    MaskedDataset out(d_);
    std::vector<double> row(d_);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const Eigen::VectorXd r = X.row(i).transpose();
        const Mask m = draw_mask(r, rng);
        std::copy(r.data(), r.data() + r.size(), row.begin());
        std::optional<double> yi;
        if (y) yi = (*y)(i);
        out.push_back(MaskedSample::from_complete(row, m, yi));
    }
    return out;
}

MaskedDataset ampute(const Eigen::MatrixXd& X, const AmputeConfig& cfg, Rng& rng) {
    const auto amputer = Amputer::calibrate(X, cfg);
    return amputer.apply(X, nullptr, rng);
}

double standard_normal_pdf(double z) {
    if (!std::isfinite(z)) return 0.0;
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double standard_normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double example1_conditional_variance(const Example1Params& p, const Mask& mask, double x_obs) {
    if (!(p.sigma1 > 0.0 && p.sigma2 > 0.0 && p.noise_sd > 0.0)) {
        throw DomainError("example1: standard deviations must be positive");
    }
    if (!(std::abs(p.rho) < 1.0)) throw DomainError("example1: |rho| must be < 1");
    if (mask.size() != 2) throw DomainError("example1: mask must have two entries");

    const double noise_var = p.noise_sd * p.noise_sd;
    const bool m1 = mask.missing(0);
    const bool m2 = mask.missing(1);
    if (!m1 && !m2) return noise_var;

    if (m1 && !m2) {
        // X1 | X2 = x_obs, truncated to X1 > tau1
        const double mu = p.mu1 + p.rho * (p.sigma1 / p.sigma2) * (x_obs - p.mu2);
        const double sd = p.sigma1 * std::sqrt(1.0 - p.rho * p.rho);
        const double a = (p.tau1 - mu) / sd;
        double correction = 0.0;
        if (std::isfinite(a)) {
            const double tail = 0.5 * std::erfc(a / std::numbers::sqrt2);
            const double lambda = standard_normal_pdf(a) / tail;
            correction = a * lambda - lambda * lambda;
        } else if (a > 0.0) {
            throw DomainError("example1: tau1 = +inf makes mask (1,0) impossible");
        }
        return p.beta1 * p.beta1 * sd * sd * (1.0 + correction) + noise_var;
    }
    if (!m1 && m2) {
        // X2 | X1 = x_obs, truncated to X2 < tau2
        const double mu = p.mu2 + p.rho * (p.sigma2 / p.sigma1) * (x_obs - p.mu1);
        const double sd = p.sigma2 * std::sqrt(1.0 - p.rho * p.rho);
        const double b = (p.tau2 - mu) / sd;
        double correction = 0.0;
        if (std::isfinite(b)) {
            const double head = 0.5 * std::erfc(-b / std::numbers::sqrt2);
            const double lambda = standard_normal_pdf(b) / head;
            correction = -b * lambda - lambda * lambda;
        } else if (b < 0.0) {
            throw DomainError("example1: tau2 = -inf makes mask (0,1) impossible");
        }
        return p.beta2 * p.beta2 * sd * sd * (1.0 + correction) + noise_var;
    }
    throw DomainError("example1: mask " + mask.str() + " is not supported");
}

} // namespace cpmiss
