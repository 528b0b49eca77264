#pragma once

#include "odefit/core.hpp"

namespace odefit {

/// Finite-difference derivative estimates of one scalar series.
///
/// Column j holds the j-th derivative on a common index window; the window
/// trims valid_offset samples from each end of the source series so that
/// every column is defined by interior stencils only (no one-sided formulas).
template <typename Scalar = double>
struct DerivativeStack {
    Scalar dt = Scalar(1);
    int max_order = 0;
    Index valid_offset = 0;
    Matrix<Scalar> columns;  // T' x (max_order + 1)

    Index rows() const { return columns.rows(); }
};

using DerivativeStackd = DerivativeStack<double>;

inline constexpr int kMaxDerivativeOrder = 4;

/// Derivatives of orders 0..max_order by j-fold iterated 3-point central
/// differences: (f[i+1] - f[i-1]) / (2 dt) applied j times. Second-order
/// accurate at every order; exact on polynomials of low enough degree.
template <typename Derived>
DerivativeStack<typename Derived::Scalar> differentiate(const Eigen::MatrixBase<Derived>& series,
                                                        typename Derived::Scalar dt,
                                                        int max_order) {
    using Scalar = typename Derived::Scalar;
    if (!(dt > Scalar(0))) throw std::invalid_argument("differentiate: dt must be positive");
    if (max_order < 0 || max_order > kMaxDerivativeOrder)
        throw std::invalid_argument("differentiate: max_order must be in [0, 4]");
    if (series.cols() != 1) throw std::invalid_argument("differentiate: expected a column vector");
    const Index n = series.size();
    if (n <= 2 * static_cast<Index>(max_order) + 1)
        throw std::invalid_argument("differentiate: series too short for requested order");

    Vector<Scalar> work = series;
    if (!all_finite(work)) throw std::invalid_argument("differentiate: non-finite input");

    const Index offset = max_order;
    const Index valid = n - 2 * offset;

    DerivativeStack<Scalar> stack;
    stack.dt = dt;
    stack.max_order = max_order;
    stack.valid_offset = offset;
    stack.columns.resize(valid, max_order + 1);

    // work holds the j-th derivative over its own full valid range
    // [j, n-1-j] in source indexing; each column is that range narrowed
    // to the shared window [offset, n-1-offset].
    const Scalar inv_2dt = Scalar(1) / (Scalar(2) * dt);
    stack.columns.col(0) = work.segment(offset, valid);
    for (int j = 1; j <= max_order; ++j) {
        Vector<Scalar> next(work.size() - 2);
        for (Index i = 0; i < next.size(); ++i)
            next[i] = (work[i + 2] - work[i]) * inv_2dt;
        work.swap(next);
        stack.columns.col(j) = work.segment(offset - j, valid);
    }
    return stack;
}

/// State (f, f', ..., f^(max_order-1)) at the last valid sample of the stack;
/// the natural initial condition for integrating a recovered equation of
/// order max_order forward from the end of the data.
template <typename Scalar>
Vector<Scalar> endpoint_state(const DerivativeStack<Scalar>& stack) {
    if (stack.rows() == 0) throw std::invalid_argument("endpoint_state: empty stack");
    return stack.columns.row(stack.rows() - 1).head(stack.max_order).transpose();
}

}  // namespace odefit
