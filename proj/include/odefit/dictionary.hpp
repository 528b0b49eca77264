#pragma once

#include "odefit/core.hpp"
#include "odefit/differentiate.hpp"

#include <string>
#include <vector>

namespace odefit {

/// A product of powers of the base variables.
struct Monomial {
    Eigen::VectorXi exponents;

    int degree() const { return exponents.size() == 0 ? 0 : exponents.sum(); }

    bool operator==(const Monomial& other) const {
        return exponents.size() == other.exponents.size() && exponents == other.exponents;
    }
};

/// All monomials in n_vars variables with total degree <= max_degree, in
/// graded lexicographic order: degree ascending, first variable's exponent
/// descending within a degree block. Count is C(n_vars + max_degree, max_degree).
inline std::vector<Monomial> enumerate_monomials(int n_vars, int max_degree) {
    if (n_vars < 1) throw std::invalid_argument("enumerate_monomials: n_vars must be >= 1");
    if (max_degree < 0) throw std::invalid_argument("enumerate_monomials: max_degree must be >= 0");

    std::vector<Monomial> out;
    Eigen::VectorXi exps = Eigen::VectorXi::Zero(n_vars);

    // emit exponent vectors of total degree exactly d, leading exponent high first
    auto emit = [&](auto&& self, int var, int remaining) -> void {
        if (var == n_vars - 1) {
            exps[var] = remaining;
            out.push_back(Monomial{exps});
            return;
        }
        for (int e = remaining; e >= 0; --e) {
            exps[var] = e;
            self(self, var + 1, remaining - e);
        }
        exps[var] = 0;
    };
    for (int d = 0; d <= max_degree; ++d) emit(emit, 0, d);
    return out;
}

/// Human-readable form, e.g. "f * f'^2"; the empty product renders as "1".
inline std::string format_monomial(const Monomial& m, const std::vector<std::string>& names) {
    if (m.exponents.size() != static_cast<Index>(names.size()))
        throw std::invalid_argument("format_monomial: names do not match exponent count");
    std::string out;
    for (Index k = 0; k < m.exponents.size(); ++k) {
        const int e = m.exponents[k];
        if (e == 0) continue;
        if (!out.empty()) out += " * ";
        out += names[static_cast<std::size_t>(k)];
        if (e > 1) out += "^" + std::to_string(e);
    }
    return out.empty() ? "1" : out;
}

/// Names for derivative columns of one observed series: f, f', f'', ...
inline std::vector<std::string> derivative_names(int count) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(count));
    std::string primes;
    for (int j = 0; j < count; ++j) {
        names.push_back("f" + primes);
        primes += "'";
    }
    return names;
}

/// Evaluated dictionary: X(i, k) is monomial k at sample i, y the regression
/// target. monomials fixes the column order of X.
template <typename Scalar = double>
struct FeatureMatrix {
    std::vector<Monomial> monomials;
    std::vector<std::string> variable_names;
    Matrix<Scalar> X;
    Vector<Scalar> y;

    std::vector<std::string> monomial_names() const {
        std::vector<std::string> out;
        out.reserve(monomials.size());
        for (const auto& m : monomials) out.push_back(format_monomial(m, variable_names));
        return out;
    }
};

using FeatureMatrixd = FeatureMatrix<double>;

/// One monomial evaluated row-wise over the base columns.
template <typename Derived>
Vector<typename Derived::Scalar> evaluate_monomial(const Eigen::MatrixBase<Derived>& base,
                                                   const Monomial& m) {
    using Scalar = typename Derived::Scalar;
    if (m.exponents.size() != base.cols())
        throw std::invalid_argument("evaluate_monomial: exponent count does not match columns");
    Vector<Scalar> value = Vector<Scalar>::Ones(base.rows());
    for (Index k = 0; k < m.exponents.size(); ++k)
        for (int e = 0; e < m.exponents[k]; ++e) value.array() *= base.col(k).array();
    return value;
}

/// Dictionary over arbitrary named base columns regressed against `target`.
template <typename DerivedBase, typename DerivedTarget>
FeatureMatrix<typename DerivedBase::Scalar> build_features(
    const Eigen::MatrixBase<DerivedBase>& base, const std::vector<std::string>& variable_names,
    const Eigen::MatrixBase<DerivedTarget>& target, int max_degree) {
    using Scalar = typename DerivedBase::Scalar;
    if (base.cols() != static_cast<Index>(variable_names.size()))
        throw std::invalid_argument("build_features: variable names do not match columns");
    if (base.rows() != target.size())
        throw std::invalid_argument("build_features: target length does not match rows");
    if (max_degree < 1) throw std::invalid_argument("build_features: max_degree must be >= 1");

    FeatureMatrix<Scalar> features;
    features.monomials = enumerate_monomials(static_cast<int>(base.cols()), max_degree);
    features.variable_names = variable_names;
    features.X.resize(base.rows(), static_cast<Index>(features.monomials.size()));
    for (std::size_t k = 0; k < features.monomials.size(); ++k)
        features.X.col(static_cast<Index>(k)) = evaluate_monomial(base, features.monomials[k]);
    features.y = target;
    return features;
}

/// The latent-variable dictionary: base variables are derivative orders
/// 0..target_order-1 of the observed series, target is order target_order.
/// The target column never appears as a regressor.
template <typename Scalar>
FeatureMatrix<Scalar> build_features(const DerivativeStack<Scalar>& stack, int target_order,
                                     int max_degree) {
    if (target_order < 1)
        throw std::invalid_argument("build_features: target_order must be >= 1");
    if (target_order > stack.max_order)
        throw std::invalid_argument("build_features: target_order exceeds stack.max_order");
    return build_features(stack.columns.leftCols(target_order), derivative_names(target_order),
                          stack.columns.col(target_order), max_degree);
}

}  // namespace odefit
