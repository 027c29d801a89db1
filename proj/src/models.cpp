#include "cpmiss/models.hpp"

#include "cpmiss/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cpmiss {

namespace {

constexpr double kRidgePenalty = 1e-8;

struct OlsFit {
    Eigen::VectorXd coef;
    double intercept = 0.0;
    bool ridge = false;
};

/// OLS with intercept via centered QR; ridge when the centered design is rank deficient.
OlsFit solve_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    OlsFit fit;
    if (n == 0) throw InsufficientDataError("least squares: no rows");
    const double ybar = y.mean();
    if (p == 0) {
        fit.coef.resize(0);
        fit.intercept = ybar;
        return fit;
    }
    const Eigen::RowVectorXd xbar = X.colwise().mean();
    const Eigen::MatrixXd Xc = X.rowwise() - xbar;
    const Eigen::VectorXd yc = y.array() - ybar;

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xc);
    if (n > p && qr.rank() == p) {
        fit.coef = qr.solve(yc);
    } else {
        Eigen::MatrixXd gram = Xc.transpose() * Xc;
        gram.diagonal().array() += kRidgePenalty;
        fit.coef = gram.ldlt().solve(Xc.transpose() * yc);
        fit.ridge = true;
    }
    fit.intercept = ybar - xbar.dot(fit.coef);
    return fit;
}

/// Row order that sorts (X, y) lexicographically; used to make fits row-order invariant.
std::vector<Eigen::Index> canonical_rows(const Eigen::MatrixXd& X, const Eigen::VectorXd* y) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(X.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            if (X(a, j) < X(b, j)) return true;
            if (X(b, j) < X(a, j)) return false;
        }
        if (y) return (*y)(a) < (*y)(b);
        return false;
    });
    return order;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
    return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(rows[i]);
    return out;
}

/// Missing entries sort before observed ones, then by value.
bool sample_less(const MaskedSample& a, const MaskedSample& b) {
    for (std::size_t j = 0; j < a.dim(); ++j) {
        const auto& u = a.x()[j];
        const auto& v = b.x()[j];
        if (u.has_value() != v.has_value()) return !u.has_value();
        if (u && *u != *v) return *u < *v;
    }
    return false;
}

double empirical_quantile(std::vector<double> values, double tau) {
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    auto k = static_cast<std::size_t>(std::ceil(tau * static_cast<double>(n)));
    k = std::clamp<std::size_t>(k, 1, n);
    return values[k - 1];
}

} // namespace

bool FittedImputer::any_column_all_missing() const {
    return std::any_of(column_all_missing.begin(), column_all_missing.end(), [](bool b) { return b; });
}

FittedImputer fit_chained_imputer(const MaskedDataset& train, std::size_t iterations) {
    if (train.empty()) throw InsufficientDataError("fit_chained_imputer: empty training set");
    const std::size_t d = train.dim();
    const auto di = static_cast<Eigen::Index>(d);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sample_less(train[a], train[b]); });

    FittedImputer imp;
    imp.dim = d;
    imp.iterations = iterations;
    imp.column_means = Eigen::VectorXd::Zero(di);
    imp.column_all_missing.assign(d, false);

    const auto n = static_cast<Eigen::Index>(train.size());
    Eigen::MatrixXd completed(n, di);
    std::vector<std::vector<Eigen::Index>> observed_rows(d), missing_rows(d);
    for (std::size_t j = 0; j < d; ++j) {
        double sum = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto& v = train[order[static_cast<std::size_t>(r)]].x()[j];
            if (v) {
                sum += *v;
                observed_rows[j].push_back(r);
            } else {
                missing_rows[j].push_back(r);
            }
        }
        if (observed_rows[j].empty()) {
            imp.column_all_missing[j] = true;
        } else {
            imp.column_means(static_cast<Eigen::Index>(j)) = sum / static_cast<double>(observed_rows[j].size());
        }
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto& v = train[order[static_cast<std::size_t>(r)]].x()[j];
            completed(r, static_cast<Eigen::Index>(j)) = v ? *v : imp.column_means(static_cast<Eigen::Index>(j));
        }
    }

    imp.column_models.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        imp.column_models[j].coef = Eigen::VectorXd::Zero(di);
        imp.column_models[j].intercept = imp.column_means(static_cast<Eigen::Index>(j));
    }

    for (std::size_t it = 0; it < iterations; ++it) {
        for (std::size_t j = 0; j < d; ++j) {
            const auto& rows = observed_rows[j];
            if (rows.empty()) continue;
            const auto jj = static_cast<Eigen::Index>(j);
            Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()), di - 1);
            Eigen::VectorXd target(static_cast<Eigen::Index>(rows.size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                const auto ri = static_cast<Eigen::Index>(r);
                Eigen::Index c = 0;
                for (Eigen::Index k = 0; k < di; ++k) {
                    if (k != jj) design(ri, c++) = completed(rows[r], k);
                }
                target(ri) = completed(rows[r], jj);
            }
            const OlsFit fit = solve_ols(design, target);
            imp.ridge_fallback = imp.ridge_fallback || fit.ridge;
            auto& model = imp.column_models[j];
            model.intercept = fit.intercept;
            Eigen::Index c = 0;
            for (Eigen::Index k = 0; k < di; ++k) {
                model.coef(k) = (k == jj) ? 0.0 : fit.coef(c++);
            }
            for (auto r : missing_rows[j]) {
                completed(r, jj) = model.predict(completed.row(r).transpose());
            }
        }
    }
    return imp;
}

Eigen::VectorXd impute(const FittedImputer& imp, const MaskedSample& s) {
    if (s.dim() != imp.dim) throw DimensionError("impute: sample dimension does not match the imputer");
    Eigen::VectorXd out = imp.column_means;
    std::vector<Eigen::Index> missing;
    for (std::size_t j = 0; j < s.dim(); ++j) {
        if (s.x()[j]) {
            out(static_cast<Eigen::Index>(j)) = *s.x()[j];
        } else {
            missing.push_back(static_cast<Eigen::Index>(j));
        }
    }
    if (missing.empty()) return out;
    for (std::size_t it = 0; it < imp.iterations; ++it) {
        for (auto j : missing) {
            if (imp.column_all_missing[static_cast<std::size_t>(j)]) continue;
            out(j) = imp.column_models[static_cast<std::size_t>(j)].predict(out);
        }
    }
    return out;
}

double FittedRegressor::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (kind == RegressorKind::LeastSquares) return mean.predict(x);
    const auto [lo, hi] = predict_quantiles(x);
    return 0.5 * (lo + hi);
}

std::pair<double, double> FittedRegressor::predict_quantiles(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (kind != RegressorKind::QuantilePair) {
        throw ConfigError("predict_quantiles needs a quantile regressor");
    }
    double lo = lower.predict(x);
    double hi = upper.predict(x);
    if (lo > hi) std::swap(lo, hi);
    return {lo, hi};
}

FittedRegressor fit_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() != y.size()) throw DimensionError("fit_least_squares: X/y row mismatch");
    const auto order = canonical_rows(X, &y);
    const OlsFit fit = solve_ols(take_rows(X, order), take_rows(y, order));
    FittedRegressor reg;
    reg.kind = RegressorKind::LeastSquares;
    reg.mean.coef = fit.coef;
    reg.mean.intercept = fit.intercept;
    reg.ridge_fallback = fit.ridge;
    return reg;
}

double pinball_objective(const LinearModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double r = y(i) - model.predict(X.row(i).transpose());
        total += r >= 0.0 ? tau * r : (tau - 1.0) * r;
    }
    return total / static_cast<double>(X.rows());
}

LinearModel fit_linear_quantile(const Eigen::MatrixXd& Xraw, const Eigen::VectorXd& yraw, double tau,
                                const QuantileFitOptions& options, bool* converged) {
    if (!(tau > 0.0 && tau < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
    if (Xraw.rows() != yraw.size()) throw DimensionError("fit_linear_quantile: X/y row mismatch");
    if (Xraw.rows() == 0) throw InsufficientDataError("fit_linear_quantile: no rows");

    const auto order = canonical_rows(Xraw, &yraw);
    const Eigen::MatrixXd X = take_rows(Xraw, order);
    const Eigen::VectorXd y = take_rows(yraw, order);
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();

    // standardize covariates
    const Eigen::RowVectorXd center = X.colwise().mean();
    Eigen::RowVectorXd scale(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double var = (X.col(j).array() - center(j)).square().mean();
        scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    const Eigen::MatrixXd Z = (X.rowwise() - center).array().rowwise() / scale.array();

    const OlsFit ls = solve_ols(Z, y);
    Eigen::VectorXd theta(p + 1);
    theta(0) = ls.intercept;
    theta.tail(p) = ls.coef;

    auto residuals = [&](const Eigen::VectorXd& t) -> Eigen::VectorXd {
        return (y - Z * t.tail(p)).array() - t(0);
    };
    auto objective = [&](const Eigen::VectorXd& r) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) total += r(i) >= 0.0 ? tau * r(i) : (tau - 1.0) * r(i);
        return total / static_cast<double>(n);
    };

    Eigen::VectorXd r = residuals(theta);
    {
        std::vector<double> rv(r.data(), r.data() + n);
        theta(0) += empirical_quantile(std::move(rv), tau);
    }
    r = residuals(theta);
    const double resid_scale = std::sqrt(r.array().square().mean());
    const double step0 = resid_scale > 0.0 ? 0.5 * resid_scale : 0.0;

    Eigen::VectorXd best = theta;
    double best_obj = objective(r);
    double window_start_obj = best_obj;
    bool done = step0 == 0.0;

    Eigen::VectorXd grad(p + 1);
    std::size_t it = 1;
    for (; !done && it <= options.max_iterations; ++it) {
        grad.setZero();
        for (Eigen::Index i = 0; i < n; ++i) {
            const double g = r(i) < 0.0 ? (1.0 - tau) : -tau;
            grad(0) += g;
            grad.tail(p) += g * Z.row(i).transpose();
        }
        grad /= static_cast<double>(n);
        const double gnorm = grad.norm();
        if (gnorm == 0.0) {
            done = true;
            break;
        }
        theta -= (step0 / std::sqrt(static_cast<double>(it))) * grad / gnorm;
        r = residuals(theta);
        const double obj = objective(r);
        if (obj < best_obj) {
            best_obj = obj;
            best = theta;
        }
        if (it % options.check_every == 0) {
            if (window_start_obj - best_obj <= options.tolerance * (1.0 + std::abs(best_obj))) {
                done = true;
            }
            window_start_obj = best_obj;
        }
    }
    if (converged) *converged = done;

    LinearModel model;
    model.coef = best.tail(p).array() / scale.transpose().array();
    model.intercept = best(0) - center.dot(model.coef);
    return model;
}

FittedRegressor fit_quantile_pair(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha,
                                  const QuantileFitOptions& options) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("fit_quantile_pair: alpha must lie in (0, 1)");
    FittedRegressor reg;
    reg.kind = RegressorKind::QuantilePair;
    reg.alpha = alpha;
    bool conv_lo = true;
    bool conv_hi = true;
    reg.lower = fit_linear_quantile(X, y, alpha / 2.0, options, &conv_lo);
    reg.upper = fit_linear_quantile(X, y, 1.0 - alpha / 2.0, options, &conv_hi);
    reg.converged = conv_lo && conv_hi;
    return reg;
}

FittedPipeline fit_pipeline(const MaskedDataset& train, RegressorKind kind, double alpha,
                            std::size_t imputer_iterations) {
    if (train.empty()) throw InsufficientDataError("fit_pipeline: empty training set");
    if (!train.has_responses()) throw DataError("fit_pipeline: every training sample needs a response");
    FittedPipeline pipe;
    pipe.imputer = fit_chained_imputer(train, imputer_iterations);
    const auto n = static_cast<Eigen::Index>(train.size());
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(train.dim()));
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = train[static_cast<std::size_t>(i)];
        X.row(i) = impute(pipe.imputer, s).transpose();
        y(i) = *s.y();
    }
    pipe.regressor = kind == RegressorKind::LeastSquares ? fit_least_squares(X, y) : fit_quantile_pair(X, y, alpha);
    return pipe;
}

} // namespace cpmiss
