#pragma once

#include "odefit/core.hpp"
#include "odefit/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace odefit {

template <typename Scalar = double>
struct LassoConfig {
    int n_lambdas = 100;
    Scalar lambda_min_ratio = Scalar(1e-3);
    int max_iter = 10000;  // coordinate-descent sweeps per lambda
    Scalar tol = Scalar(1e-4);
    int cv_folds = 10;

    void validate() const {
        if (n_lambdas < 1) throw std::invalid_argument("LassoConfig: n_lambdas must be >= 1");
        if (!(lambda_min_ratio > Scalar(0) && lambda_min_ratio < Scalar(1)))
            throw std::invalid_argument("LassoConfig: lambda_min_ratio must be in (0, 1)");
        if (max_iter < 1) throw std::invalid_argument("LassoConfig: max_iter must be >= 1");
        if (!(tol > Scalar(0))) throw std::invalid_argument("LassoConfig: tol must be positive");
        if (cv_folds < 2) throw std::invalid_argument("LassoConfig: cv_folds must be >= 2");
    }
};

using LassoConfigd = LassoConfig<double>;

/// Result of a cross-validated fit, reported on the original column scale:
/// predictions are intercept + X * coefficients.
template <typename Scalar = double>
struct LassoFit {
    Vector<Scalar> coefficients;
    Scalar intercept = Scalar(0);
    Scalar lambda_selected = Scalar(0);
    Vector<Scalar> lambda_path;
    Vector<Scalar> cv_mean_error;
    int n_nonzero = 0;
    bool converged = true;
};

using LassoFitd = LassoFit<double>;

template <typename Scalar>
struct CoordinateDescentResult {
    Vector<Scalar> coefficients;
    bool converged = false;
    int sweeps = 0;
};

namespace detail {

template <typename Scalar>
Scalar soft_threshold(Scalar z, Scalar lambda) {
    if (z > lambda) return z - lambda;
    if (z < -lambda) return z + lambda;
    return Scalar(0);
}

// Cyclic coordinate descent in covariance form: with gram = X'X/N and
// b = X'y/N, the quadratic-part gradient at c is b - gram*c, maintained
// incrementally so each coordinate update costs O(p) independent of N.
// Stops once a full sweep moves no coefficient by more than
// tol * max(1, max|c|) and the KKT certificate holds at tol; when small
// updates stall short of the certificate the sweep threshold tightens and
// iteration continues, up to max_iter sweeps in total.
template <typename Scalar>
CoordinateDescentResult<Scalar> cd_covariance(const Matrix<Scalar>& gram,
                                              const Vector<Scalar>& b, Scalar lambda,
                                              Vector<Scalar> start,
                                              const LassoConfig<Scalar>& config) {
    const Index p = b.size();
    CoordinateDescentResult<Scalar> result{std::move(start), false, 0};
    Vector<Scalar>& c = result.coefficients;
    if (p == 0) {
        result.converged = true;
        return result;
    }
    Vector<Scalar> gram_c = gram * c;
    Scalar tighten = Scalar(1);

    auto sweep = [&](bool active_only) {
        Scalar max_update = Scalar(0);
        for (Index j = 0; j < p; ++j) {
            if (active_only && c[j] == Scalar(0)) continue;
            const Scalar gradient = b[j] - gram_c[j];
            const Scalar updated = soft_threshold(c[j] + gradient, lambda);
            if (updated != c[j]) {
                const Scalar delta = updated - c[j];
                gram_c.noalias() += gram.col(j) * delta;
                max_update = std::max(max_update, std::abs(delta));
                c[j] = updated;
            }
        }
        return max_update;
    };
    auto threshold = [&] {
        return tighten * config.tol * std::max(Scalar(1), c.cwiseAbs().maxCoeff());
    };
    auto kkt_ok = [&] {
        Scalar worst = Scalar(0);
        for (Index j = 0; j < p; ++j) {
            const Scalar gradient = b[j] - gram_c[j];
            if (c[j] == Scalar(0))
                worst = std::max(worst, std::abs(gradient) - lambda);
            else
                worst = std::max(worst, std::abs(gradient - lambda * (c[j] > Scalar(0)
                                                                          ? Scalar(1)
                                                                          : Scalar(-1))));
        }
        return worst <= config.tol;
    };

    while (result.sweeps < config.max_iter) {
        const Scalar full_update = sweep(false);
        ++result.sweeps;
        if (full_update < threshold()) {
            if (kkt_ok()) {
                result.converged = true;
                return result;
            }
            tighten *= Scalar(0.25);
        } else {
            while (result.sweeps < config.max_iter) {
                const Scalar active_update = sweep(true);
                ++result.sweeps;
                if (active_update < threshold()) break;
            }
        }
    }
    return result;  // converged = false
}

}  // namespace detail

/// Maximum violation of the Lasso stationarity conditions at `coef` for the
/// 1/(2N) objective: |X_j'r/N| - lambda where coef_j = 0, and
/// |X_j'r/N - lambda sign(coef_j)| where coef_j != 0. A solver-independent
/// optimality certificate; non-positive-to-tol means optimal.
template <typename Scalar>
Scalar kkt_violation(const Matrix<Scalar>& X_std, const Vector<Scalar>& y_centered,
                     const Vector<Scalar>& coef, Scalar lambda) {
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(X_std.rows());
    const Vector<Scalar> residual = y_centered - X_std * coef;
    Scalar worst = Scalar(0);
    for (Index j = 0; j < X_std.cols(); ++j) {
        const Scalar g = X_std.col(j).dot(residual) * inv_n;
        if (coef[j] == Scalar(0))
            worst = std::max(worst, std::abs(g) - lambda);
        else
            worst = std::max(worst, std::abs(g - lambda * (coef[j] > Scalar(0) ? Scalar(1) : Scalar(-1))));
    }
    return worst;
}

/// Geometric grid of n_lambdas penalties descending from
/// lambda_max = max_j |X_j'y| / N down to lambda_max * lambda_min_ratio.
/// At the head of the path the Lasso solution is identically zero.
template <typename Scalar>
Vector<Scalar> lambda_path(const Matrix<Scalar>& X_std, const Vector<Scalar>& y_centered,
                           const LassoConfig<Scalar>& config) {
    config.validate();
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(std::max<Index>(X_std.rows(), 1));
    // Same arithmetic as the descent's gradient so that the head of the path
    // zeroes every coordinate exactly, not just to rounding.
    const Vector<Scalar> b = (X_std.transpose() * y_centered) * inv_n;
    const Scalar lambda_max = b.size() == 0 ? Scalar(0) : b.cwiseAbs().maxCoeff();
    // lambda_max == 0 (e.g. y identically zero) yields the degenerate all-zero
    // path; every fit along it is the all-zero coefficient vector.
    Vector<Scalar> path(config.n_lambdas);
    if (config.n_lambdas == 1) {
        path[0] = lambda_max;
        return path;
    }
    const Scalar denom = static_cast<Scalar>(config.n_lambdas - 1);
    for (int k = 0; k < config.n_lambdas; ++k)
        path[k] = lambda_max * std::pow(config.lambda_min_ratio, static_cast<Scalar>(k) / denom);
    return path;
}

/// Cyclic coordinate descent for the Lasso
///   min_c  1/(2N) ||y - X c||^2 + lambda ||c||_1
/// on a standardized design (zero-mean, unit-variance columns). Sweeps stop
/// once the largest coefficient update falls below tol * max(1, max|c|) and
/// the KKT certificate holds at tol; hitting max_iter first returns the best
/// iterate with converged = false.
template <typename Scalar>
CoordinateDescentResult<Scalar> coordinate_descent(const Matrix<Scalar>& X_std,
                                                   const Vector<Scalar>& y_centered, Scalar lambda,
                                                   const Vector<Scalar>& warm_start,
                                                   const LassoConfig<Scalar>& config) {
    config.validate();
    if (lambda < Scalar(0)) throw std::invalid_argument("coordinate_descent: lambda must be >= 0");
    if (X_std.rows() != y_centered.size())
        throw std::invalid_argument("coordinate_descent: X and y row counts differ");
    const Index n = X_std.rows();
    const Index p = X_std.cols();

    if (warm_start.size() != 0 && warm_start.size() != p)
        throw std::invalid_argument("coordinate_descent: warm start has wrong length");
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
    const Matrix<Scalar> gram = (X_std.transpose() * X_std) * inv_n;
    const Vector<Scalar> b = (X_std.transpose() * y_centered) * inv_n;
    return detail::cd_covariance<Scalar>(
        gram, b, lambda, warm_start.size() == p ? warm_start : Vector<Scalar>::Zero(p), config);
}

namespace detail {

template <typename Scalar>
struct Standardization {
    Vector<Scalar> mean;
    Vector<Scalar> stddev;  // population convention, zero-variance guarded to 1
    Scalar y_mean = Scalar(0);
};

// Column means / standard deviations of the penalized columns plus the target
// mean. Columns with (numerically) zero variance get stddev 1 and are handled
// by the caller.
template <typename Scalar>
Standardization<Scalar> standardize(const Matrix<Scalar>& X, const Vector<Scalar>& y,
                                    Matrix<Scalar>& X_std, Vector<Scalar>& y_centered) {
    const Index n = X.rows();
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
    Standardization<Scalar> stats;
    stats.mean = (X.colwise().sum() * inv_n).transpose();
    X_std = X.rowwise() - stats.mean.transpose();
    stats.stddev.resize(X.cols());
    for (Index j = 0; j < X.cols(); ++j) {
        Scalar sd = std::sqrt(X_std.col(j).squaredNorm() * inv_n);
        if (!(sd > Scalar(0))) sd = Scalar(1);
        stats.stddev[j] = sd;
        X_std.col(j) /= sd;
    }
    stats.y_mean = y.sum() * inv_n;
    y_centered = y;
    y_centered.array() -= stats.y_mean;
    return stats;
}

// A column is treated as constant (absorbed by the intercept) when its
// spread is negligible against its magnitude.
template <typename Derived>
bool is_constant_column(const Eigen::MatrixBase<Derived>& col) {
    using Scalar = typename Derived::Scalar;
    const Scalar mean = col.sum() / static_cast<Scalar>(col.size());
    const Scalar sq = (col.array() - mean).matrix().squaredNorm() / static_cast<Scalar>(col.size());
    return std::sqrt(sq) <= Scalar(1e-12) * std::max(Scalar(1), std::abs(mean));
}

}  // namespace detail

/// Lasso over the descending lambda path with warm starts, selecting lambda by
/// contiguous-block k-fold cross-validation (folds standardized with their own
/// training statistics), then refit on the full data at the selected lambda.
///
/// Constant dictionary columns (the monomial 1, and any column degenerate on
/// this data) are excluded from the penalized design; their effect is carried
/// by the unpenalized intercept. Returned coefficients are on the original
/// column scale. Ties in CV error resolve to the largest lambda.
template <typename Scalar>
LassoFit<Scalar> fit_cv(const FeatureMatrix<Scalar>& features, const LassoConfig<Scalar>& config) {
    config.validate();
    const Index n = features.X.rows();
    const Index p = features.X.cols();
    if (n != features.y.size()) throw std::invalid_argument("fit_cv: X and y row counts differ");
    if (n < config.cv_folds)
        throw std::invalid_argument("fit_cv: fewer rows than cross-validation folds");
    if (!all_finite(features.X) || !all_finite(features.y))
        throw std::invalid_argument("fit_cv: non-finite feature data");

    std::vector<Index> penalized;
    penalized.reserve(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j)
        if (!detail::is_constant_column(features.X.col(j))) penalized.push_back(j);
    const Index pp = static_cast<Index>(penalized.size());

    Matrix<Scalar> Xp(n, pp);
    for (Index j = 0; j < pp; ++j) Xp.col(j) = features.X.col(penalized[static_cast<std::size_t>(j)]);

    // Shared path from full-data statistics.
    Matrix<Scalar> Xs_full;
    Vector<Scalar> yc_full;
    const auto stats_full = detail::standardize<Scalar>(Xp, features.y, Xs_full, yc_full);

    LassoFit<Scalar> fit;
    fit.lambda_path = lambda_path<Scalar>(Xs_full, yc_full, config);
    const int n_lambdas = config.n_lambdas;

    // Cross-validation: contiguous blocks in row (time) order.
    const int folds = config.cv_folds;
    Vector<Scalar> cv_error_sum = Vector<Scalar>::Zero(n_lambdas);
    for (int f = 0; f < folds; ++f) {
        const Index lo = n * f / folds;
        const Index hi = n * (f + 1) / folds;
        const Index n_val = hi - lo;
        const Index n_tr = n - n_val;

        Matrix<Scalar> X_tr(n_tr, pp);
        Vector<Scalar> y_tr(n_tr);
        X_tr.topRows(lo) = Xp.topRows(lo);
        X_tr.bottomRows(n - hi) = Xp.bottomRows(n - hi);
        y_tr.head(lo) = features.y.head(lo);
        y_tr.tail(n - hi) = features.y.tail(n - hi);

        Matrix<Scalar> Xs_tr;
        Vector<Scalar> yc_tr;
        const auto stats = detail::standardize<Scalar>(X_tr, y_tr, Xs_tr, yc_tr);
        const Scalar inv_n_tr = Scalar(1) / static_cast<Scalar>(n_tr);
        const Matrix<Scalar> gram = (Xs_tr.transpose() * Xs_tr) * inv_n_tr;
        const Vector<Scalar> b = (Xs_tr.transpose() * yc_tr) * inv_n_tr;

        Vector<Scalar> warm = Vector<Scalar>::Zero(pp);
        Vector<Scalar> coef_orig(pp);
        for (int k = 0; k < n_lambdas; ++k) {
            warm = detail::cd_covariance<Scalar>(gram, b, fit.lambda_path[k], warm, config)
                       .coefficients;
            coef_orig = warm.cwiseQuotient(stats.stddev);
            const Scalar intercept = stats.y_mean - coef_orig.dot(stats.mean);
            Vector<Scalar> predicted = Xp.middleRows(lo, n_val) * coef_orig;
            predicted.array() += intercept;
            cv_error_sum[k] += (features.y.segment(lo, n_val) - predicted).squaredNorm() /
                               static_cast<Scalar>(n_val);
        }
    }
    fit.cv_mean_error = cv_error_sum / static_cast<Scalar>(folds);

    int selected = 0;  // path is descending, so the first minimum is the largest lambda
    for (int k = 1; k < n_lambdas; ++k)
        if (fit.cv_mean_error[k] < fit.cv_mean_error[selected]) selected = k;
    fit.lambda_selected = fit.lambda_path[selected];

    // Refit on the full data, warm-starting down the path to the selection.
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
    const Matrix<Scalar> gram_full = (Xs_full.transpose() * Xs_full) * inv_n;
    const Vector<Scalar> b_full = (Xs_full.transpose() * yc_full) * inv_n;
    Vector<Scalar> warm = Vector<Scalar>::Zero(pp);
    fit.converged = true;
    for (int k = 0; k <= selected; ++k) {
        auto cd = detail::cd_covariance<Scalar>(gram_full, b_full, fit.lambda_path[k], warm, config);
        warm = std::move(cd.coefficients);
        if (k == selected) fit.converged = cd.converged;
    }

    fit.coefficients = Vector<Scalar>::Zero(p);
    for (Index j = 0; j < pp; ++j)
        fit.coefficients[penalized[static_cast<std::size_t>(j)]] = warm[j] / stats_full.stddev[j];
    fit.intercept = stats_full.y_mean;
    for (Index j = 0; j < pp; ++j)
        fit.intercept -= fit.coefficients[penalized[static_cast<std::size_t>(j)]] *
                         stats_full.mean[j];
    fit.n_nonzero = static_cast<int>((fit.coefficients.array() != Scalar(0)).count());
    return fit;
}

/// Named coefficient vectors as monomial -> value maps. Fits fold the
/// intercept into the "1" key so maps line up with dictionaries that list the
/// constant explicitly.
template <typename Scalar>
std::map<std::string, Scalar> to_coefficient_map(const LassoFit<Scalar>& fit,
                                                 const FeatureMatrix<Scalar>& features) {
    if (fit.coefficients.size() != static_cast<Index>(features.monomials.size()))
        throw std::invalid_argument("to_coefficient_map: fit does not match feature matrix");
    std::map<std::string, Scalar> out;
    const auto names = features.monomial_names();
    for (std::size_t k = 0; k < names.size(); ++k) {
        Scalar value = fit.coefficients[static_cast<Index>(k)];
        if (features.monomials[k].degree() == 0) value += fit.intercept;
        out[names[k]] = value;
    }
    return out;
}

/// Mean squared difference over the union of keys; a key absent from one map
/// reads as zero there. Maps built over a full dictionary therefore average
/// over every dictionary entry, structural zeros included.
template <typename Scalar>
Scalar coefficient_mse(const std::map<std::string, Scalar>& fitted,
                       const std::map<std::string, Scalar>& truth) {
    std::map<std::string, Scalar> diff;
    for (const auto& [key, value] : fitted) diff[key] = value;
    for (const auto& [key, value] : truth) diff[key] -= value;
    if (diff.empty()) return Scalar(0);
    Scalar sum = Scalar(0);
    for (const auto& [key, value] : diff) sum += value * value;
    return sum / static_cast<Scalar>(diff.size());
}

}  // namespace odefit
