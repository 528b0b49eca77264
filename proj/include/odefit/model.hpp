#pragma once

#include "odefit/core.hpp"
#include "odefit/dictionary.hpp"
#include "odefit/differentiate.hpp"
#include "odefit/lasso.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace odefit {

/// A recovered scalar equation of order n,
///   f^(n) = intercept + sum_i coefficients[i] * monomial_i(f, f', ..., f^(n-1)),
/// integrated in companion form for forecasting.
template <typename Scalar = double>
struct SparseOdeModel {
    int target_order = 1;
    int max_degree = 1;
    std::vector<Monomial> monomials;  // over derivative orders 0..target_order-1
    Vector<Scalar> coefficients;
    Scalar intercept = Scalar(0);
    Scalar dt = Scalar(1);
    LassoFit<Scalar> provenance;

    std::vector<std::string> variable_names() const { return derivative_names(target_order); }

    std::string equation_string() const {
        const auto names = variable_names();
        std::string lhs = "f" + std::string(static_cast<std::size_t>(target_order), '\'');
        std::string rhs_terms;
        auto append = [&](Scalar value, const std::string& term) {
            if (value == Scalar(0)) return;
            if (!rhs_terms.empty()) rhs_terms += value < Scalar(0) ? " - " : " + ";
            else if (value < Scalar(0)) rhs_terms += "-";
            rhs_terms += std::to_string(std::abs(static_cast<double>(value)));
            if (!term.empty() && term != "1") rhs_terms += "*" + term;
        };
        append(intercept, "1");
        for (std::size_t k = 0; k < monomials.size(); ++k)
            append(coefficients[static_cast<Index>(k)], format_monomial(monomials[k], names));
        if (rhs_terms.empty()) rhs_terms = "0";
        return lhs + " = " + rhs_terms;
    }
};

using SparseOdeModeld = SparseOdeModel<double>;

template <typename Scalar>
SparseOdeModel<Scalar> make_model(const FeatureMatrix<Scalar>& features,
                                  const LassoFit<Scalar>& fit, int target_order,
                                  int max_degree, Scalar dt) {
    if (fit.coefficients.size() != static_cast<Index>(features.monomials.size()))
        throw std::invalid_argument("make_model: fit does not match feature matrix");
    SparseOdeModel<Scalar> model;
    model.target_order = target_order;
    model.max_degree = max_degree;
    model.monomials = features.monomials;
    model.coefficients = fit.coefficients;
    model.intercept = fit.intercept;
    model.dt = dt;
    model.provenance = fit;
    return model;
}

/// Companion-form right-hand side: state (f, f', ..., f^(n-1)) maps to
/// (f', ..., f^(n-1), recovered n-th derivative).
template <typename Scalar, typename Derived>
Vector<Scalar> model_rhs(const SparseOdeModel<Scalar>& model,
                         const Eigen::MatrixBase<Derived>& state) {
    static_assert(std::is_same_v<typename Derived::Scalar, Scalar>,
                  "state scalar type must match the model");
    const int n = model.target_order;
    if (state.size() != n)
        throw std::invalid_argument("model_rhs: state length does not match target order");
    if (!all_finite(state))
        throw IntegrationDivergedError("model_rhs: non-finite state", 0);

    Vector<Scalar> out(n);
    for (int i = 0; i + 1 < n; ++i) out[i] = state[i + 1];

    Scalar top = model.intercept;
    for (std::size_t k = 0; k < model.monomials.size(); ++k) {
        const Scalar c = model.coefficients[static_cast<Index>(k)];
        if (c == Scalar(0)) continue;
        Scalar term = c;
        const auto& exps = model.monomials[k].exponents;
        for (Index v = 0; v < exps.size(); ++v)
            for (int e = 0; e < exps[v]; ++e) term *= state[v];
        top += term;
    }
    out[n - 1] = top;
    return out;
}

/// Forecast of the observed channel together with its scoring context.
/// predictions[i] corresponds to horizons[i]; when the integration left the
/// finite range at some step, diverged_at is the first affected index into
/// horizons and predictions stops there (no non-finite entries are stored).
template <typename Scalar = double>
struct ForecastReport {
    std::vector<int> horizons;
    std::vector<Scalar> predictions;
    std::vector<Scalar> truth;             // empty when unknown
    std::vector<Scalar> smape_by_horizon;  // empty until truth is attached
    std::optional<int> diverged_at;
};

using ForecastReportd = ForecastReport<double>;

/// Integrate the recovered equation forward from the derivative estimates at
/// the end of the stack. Horizon h is h RK4 steps of size model.dt past the
/// stack's last valid sample; the prediction is the state's first component.
template <typename Scalar>
ForecastReport<Scalar> forecast(const SparseOdeModel<Scalar>& model,
                                const DerivativeStack<Scalar>& stack,
                                const std::vector<int>& horizons) {
    const int n = model.target_order;
    if (stack.max_order < n)
        throw std::invalid_argument("forecast: stack does not carry enough derivative orders");
    if (stack.rows() == 0) throw std::invalid_argument("forecast: empty stack");
    if (std::abs(stack.dt - model.dt) > Scalar(1e-12) * std::max(std::abs(model.dt), Scalar(1)))
        throw std::invalid_argument("forecast: model and stack disagree on dt");
    if (horizons.empty()) throw std::invalid_argument("forecast: no horizons requested");
    for (std::size_t i = 0; i < horizons.size(); ++i) {
        if (horizons[i] < 1)
            throw std::invalid_argument("forecast: horizons must be positive");
        if (i > 0 && horizons[i] <= horizons[i - 1])
            throw std::invalid_argument("forecast: horizons must be strictly ascending");
    }

    ForecastReport<Scalar> report;
    report.horizons = horizons;
    report.predictions.reserve(horizons.size());

    Vector<Scalar> state = stack.columns.row(stack.rows() - 1).head(n).transpose();
    const Scalar dt = model.dt;
    const Scalar half = dt / Scalar(2);
    Vector<Scalar> k1(n), k2(n), k3(n), k4(n);

    std::size_t next = 0;
    const int last_step = horizons.back();
    for (int step = 1; step <= last_step && next < horizons.size(); ++step) {
        try {
            k1 = model_rhs(model, state);
            k2 = model_rhs(model, state + half * k1);
            k3 = model_rhs(model, state + half * k2);
            k4 = model_rhs(model, state + dt * k3);
        } catch (const IntegrationDivergedError&) {
            report.diverged_at = static_cast<int>(next);
            return report;
        }
        state += (dt / Scalar(6)) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
        if (!all_finite(state)) {
            report.diverged_at = static_cast<int>(next);
            return report;
        }
        if (horizons[next] == step) {
            report.predictions.push_back(state[0]);
            ++next;
        }
    }
    return report;
}

}  // namespace odefit
