#pragma once

#include "cpmiss/core.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <utility>
#include <vector>

namespace cpmiss {

struct LinearModel {
    Eigen::VectorXd coef;
    double intercept = 0.0;

    double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const { return intercept + coef.dot(x); }
};

/// Chained-equations imputer: one linear conditional-mean model per column,
/// fitted on the other columns of the iteratively completed training matrix.
struct FittedImputer {
    std::size_t dim = 0;
    std::size_t iterations = 0;
    /// Observed-value column means; 0 for columns with no observed value.
    Eigen::VectorXd column_means;
    /// Column j is regressed on all other columns; coef(j) is always 0.
    std::vector<LinearModel> column_models;
    std::vector<bool> column_all_missing;
    /// Some column model needed the ridge fallback.
    bool ridge_fallback = false;

    bool any_column_all_missing() const;
};

/// Fits the imputer on the covariates of `train` (responses ignored). Rows are
/// put in a canonical order first, so the fit does not depend on row order.
FittedImputer fit_chained_imputer(const MaskedDataset& train, std::size_t iterations = 5);

/// Observed coordinates pass through unchanged. Missing coordinates start at
/// the column means and are refreshed by `iterations` sweeps of the fitted
/// column models.
Eigen::VectorXd impute(const FittedImputer& imp, const MaskedSample& s);

enum class RegressorKind { LeastSquares, QuantilePair };

struct FittedRegressor {
    RegressorKind kind = RegressorKind::LeastSquares;
    LinearModel mean;
    LinearModel lower;
    LinearModel upper;
    double alpha = 0.1;
    bool ridge_fallback = false;
    bool converged = true;

    /// Least-squares prediction, or the midpoint of the quantile pair.
    double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    /// (lo, hi) with lo <= hi; crossing predictions are swapped.
    std::pair<double, double> predict_quantiles(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

/// OLS with intercept. A rank-deficient design falls back to ridge with
/// penalty 1e-8 and sets ridge_fallback.
FittedRegressor fit_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

struct QuantileFitOptions {
    std::size_t max_iterations = 5000;
    /// Relative improvement of the best objective over a check window below
    /// which the descent is declared converged.
    double tolerance = 1e-9;
    std::size_t check_every = 250;
};

/// Pinball loss of a linear model at level tau, averaged over rows.
double pinball_objective(const LinearModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau);

/// One linear quantile regression at level tau by subgradient descent on
/// standardized covariates, started from the least-squares fit shifted by the
/// empirical residual quantile. Returns the best iterate.
LinearModel fit_linear_quantile(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau,
                                const QuantileFitOptions& options = {}, bool* converged = nullptr);

/// Linear quantile fits at alpha/2 and 1 - alpha/2.
FittedRegressor fit_quantile_pair(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha,
                                  const QuantileFitOptions& options = {});

/// mu o Phi: the imputer composed with a regressor, both fitted on one training split.
struct FittedPipeline {
    FittedImputer imputer;
    FittedRegressor regressor;

    double predict(const MaskedSample& s) const { return regressor.predict(impute(imputer, s)); }
    std::pair<double, double> predict_quantiles(const MaskedSample& s) const {
        return regressor.predict_quantiles(impute(imputer, s));
    }
};

/// Fits the imputer on `train`, then the regressor on the imputed training rows.
/// Throws DataError when a training sample has no response.
FittedPipeline fit_pipeline(const MaskedDataset& train, RegressorKind kind, double alpha = 0.1,
                            std::size_t imputer_iterations = 5);

} // namespace cpmiss
