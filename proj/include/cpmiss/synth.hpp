#pragma once

#include "cpmiss/core.hpp"
#include "cpmiss/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cpmiss {

/// Gaussian linear model Y = beta'X + eps with X ~ N(mu, phi*11' + (1-phi)*I).
struct DgpConfig {
    std::size_t d = 3;
    std::vector<double> beta;
    std::vector<double> mu;
    double phi = 0.8;
    double noise_sd = 1.0;

    /// Benchmark defaults: beta is a prefix of (1, 2, -1, 3, -0.5, -1, 0.3, 1.7),
    /// mu is all ones. Throws ConfigError for d > 8.
    static DgpConfig benchmark(std::size_t d);

    Eigen::MatrixXd covariance() const;
    /// Throws ConfigError on inconsistent sizes or out-of-range parameters.
    void validate() const;
};

struct CompleteData {
    Eigen::MatrixXd X;  // n x d
    Eigen::VectorXd y;  // n
};

/// n i.i.d. draws. Consumes d + 1 normals per row, in row order.
CompleteData gen_gaussian_linear(const DgpConfig& cfg, std::size_t n, Rng& rng);

enum class Mechanism { MCAR, MAR, MNAR };

std::string to_string(Mechanism m);
Mechanism parse_mechanism(std::string_view text);

struct AmputeConfig {
    Mechanism mechanism = Mechanism::MCAR;
    /// Target per-column missing probability.
    double rate = 0.2;
    std::vector<std::size_t> maskable_columns;
    /// Slope of the self-masking logistic link (MNAR only).
    double mnar_steepness = 1.0;

    /// Maskable columns per mechanism: MAR masks the last two columns for
    /// d <= 5 and the last three otherwise; MCAR/MNAR mask every column.
    static AmputeConfig benchmark(Mechanism mechanism, std::size_t d, double rate = 0.2);

    void validate(std::size_t d) const;
};

/// Amputation mechanism with intercepts calibrated on a reference sample.
///
/// MCAR: P(M_j = 1) = rate.
/// MAR:  P(M_j = 1 | X) = logistic(b_j + sum_k z_k / sqrt(K)) where z_k are the
///       standardized always-observed columns (K of them).
/// MNAR: P(M_j = 1 | X) = logistic(s * (X_j - c_j)), upper-tail self-masking.
/// The offsets b_j / c_j are found by bisection so that the mean probability
/// over the reference sample equals `rate`.
class Amputer {
public:
    static Amputer calibrate(const Eigen::MatrixXd& reference, const AmputeConfig& cfg);

    const AmputeConfig& config() const noexcept { return cfg_; }
    std::size_t dim() const noexcept { return d_; }

    /// Missing probability of column j for one complete row.
    double missing_probability(const Eigen::Ref<const Eigen::VectorXd>& row, std::size_t j) const;

    Mask draw_mask(const Eigen::Ref<const Eigen::VectorXd>& row, Rng& rng) const;

    /// Applies the mechanism row by row. `y` may be null (no responses).
    MaskedDataset apply(const Eigen::MatrixXd& X, const Eigen::VectorXd* y, Rng& rng) const;

    /// Per-column calibrated offsets (b_j for MAR, c_j for MNAR, 0 otherwise).
    const std::vector<double>& offsets() const noexcept { return offsets_; }

private:
    AmputeConfig cfg_;
    std::size_t d_ = 0;
    std::vector<bool> maskable_;
    std::vector<double> offsets_;
    std::vector<std::size_t> drivers_;
    std::vector<double> driver_mean_;
    std::vector<double> driver_sd_;

    double linear_driver(const Eigen::Ref<const Eigen::VectorXd>& row) const;
};

/// Calibrates on X itself, then masks it. Responses are not attached.
MaskedDataset ampute(const Eigen::MatrixXd& X, const AmputeConfig& cfg, Rng& rng);

/// Bivariate illustration: Y = b1 X1 + b2 X2 + eps, X bivariate normal,
/// M1 = 1{X1 > tau1}, M2 = 1{X2 < tau2}.
struct Example1Params {
    double beta1 = 1.0;
    double beta2 = 1.0;
    double mu1 = 0.0;
    double mu2 = 0.0;
    double sigma1 = 1.0;
    double sigma2 = 1.0;
    double rho = 0.0;
    double noise_sd = 1.0;
    double tau1 = 0.0;
    double tau2 = 0.0;
};

/// Closed-form Var(Y | X_obs(m), M = m) for m in {(0,0), (1,0), (0,1)}.
/// `x_obs` is X2 for m = (1,0), X1 for m = (0,1), ignored for m = (0,0).
/// The truncated-normal variance uses inverse Mills ratios.
double example1_conditional_variance(const Example1Params& p, const Mask& mask, double x_obs);

double standard_normal_pdf(double z);
double standard_normal_cdf(double z);

} // namespace cpmiss
