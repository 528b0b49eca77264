#include "odefit/differentiate.hpp"

#include "odefit/dynamics.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace odefit;

namespace {

Vector<double> sampled(double dt, Index n, double (*f)(double)) {
    Vector<double> v(n);
    for (Index i = 0; i < n; ++i) v[i] = f(dt * static_cast<double>(i));
    return v;
}

}  // namespace

TEST_CASE("central differences are exact on t^2") {
    const double dt = 0.1;
    const auto series = sampled(dt, 101, [](double t) { return t * t; });
    const auto stack = differentiate(series, dt, 2);

    REQUIRE(stack.valid_offset == 2);
    REQUIRE(stack.rows() == 97);
    CHECK(stack.columns.col(0) == series.segment(2, 97));  // order 0 is the raw window
    for (Index i = 0; i < stack.rows(); ++i) {
        const double t = dt * static_cast<double>(i + 2);
        CHECK(std::abs(stack.columns(i, 1) - 2.0 * t) < 1e-10);
        CHECK(std::abs(stack.columns(i, 2) - 2.0) < 1e-8);
    }
}

TEST_CASE("derivatives of a constant vanish") {
    const Vector<double> series = Vector<double>::Constant(50, 5.0);
    const auto stack = differentiate(series, 0.3, 3);
    CHECK(stack.columns.col(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(stack.columns.col(2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(stack.columns.col(3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("third derivative of sin tracks -cos") {
    const double dt = 0.01;
    const auto series = sampled(dt, 1001, [](double t) { return std::sin(t); });
    const auto stack = differentiate(series, dt, 3);
    double worst = 0.0;
    for (Index i = 0; i < stack.rows(); ++i) {
        const double t = dt * static_cast<double>(i + stack.valid_offset);
        worst = std::max(worst, std::abs(stack.columns(i, 3) + std::cos(t)));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("polynomial exactness up to the stencil order") {
    const double dt = 0.05;
    SUBCASE("degree 2, orders <= 2") {
        Vector<double> series(80);
        for (Index i = 0; i < 80; ++i) {
            const double t = dt * static_cast<double>(i);
            series[i] = 1.5 - 2.0 * t + 0.75 * t * t;
        }
        const auto stack = differentiate(series, dt, 2);
        for (Index i = 0; i < stack.rows(); ++i) {
            const double t = dt * static_cast<double>(i + 2);
            CHECK(std::abs(stack.columns(i, 1) - (-2.0 + 1.5 * t)) < 1e-8);
            CHECK(std::abs(stack.columns(i, 2) - 1.5) < 1e-8);
        }
    }
    SUBCASE("degree 3, orders 2 and 3 exact, order 1 off by the c3*dt^2 constant") {
        // One central-difference pass maps t^3 to 3t^2 + dt^2, so the first
        // derivative of a cubic carries a constant offset c3*dt^2; the offset
        // is annihilated by the next pass, making orders 2 and 3 exact.
        const double c3 = 0.125;
        Vector<double> series(80);
        for (Index i = 0; i < 80; ++i) {
            const double t = dt * static_cast<double>(i);
            series[i] = 0.2 + t - 0.4 * t * t + c3 * t * t * t;
        }
        const auto stack = differentiate(series, dt, 3);
        for (Index i = 0; i < stack.rows(); ++i) {
            const double t = dt * static_cast<double>(i + 3);
            const double d1 = 1.0 - 0.8 * t + 3.0 * c3 * t * t;
            CHECK(std::abs(stack.columns(i, 1) - (d1 + c3 * dt * dt)) < 1e-8);
            CHECK(std::abs(stack.columns(i, 2) - (-0.8 + 6.0 * c3 * t)) < 1e-8);
            CHECK(std::abs(stack.columns(i, 3) - 6.0 * c3) < 1e-8);
        }
    }
}

TEST_CASE("reversing the series flips odd derivative orders") {
    const double dt = 0.02;
    const auto series = sampled(dt, 200, [](double t) { return std::exp(std::sin(3.0 * t)); });
    const Vector<double> reversed = series.reverse();

    const auto fwd = differentiate(series, dt, 3);
    const auto bwd = differentiate(reversed, dt, 3);
    for (int j = 0; j <= 3; ++j) {
        const Vector<double> expected =
            Vector<double>(fwd.columns.col(j).reverse()) * (j % 2 == 0 ? 1.0 : -1.0);
        CHECK((bwd.columns.col(j) - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("first-derivative error drops ~4x when dt halves") {
    auto max_error = [](double dt, Index n) {
        Vector<double> series(n);
        for (Index i = 0; i < n; ++i) series[i] = std::sin(dt * static_cast<double>(i));
        const auto stack = differentiate(series, dt, 1);
        double worst = 0.0;
        for (Index i = 0; i < stack.rows(); ++i) {
            const double t = dt * static_cast<double>(i + 1);
            worst = std::max(worst, std::abs(stack.columns(i, 1) - std::cos(t)));
        }
        return worst;
    };
    const double ratio = max_error(0.02, 315) / max_error(0.01, 629);
    CHECK(ratio >= 3.5);
    CHECK(ratio <= 4.5);
}

TEST_CASE("endpoint state exposes the last valid derivative estimates") {
    SUBCASE("constant series") {
        const auto stack = differentiate(Vector<double>::Constant(40, 5.0), 0.1, 2);
        const auto state = endpoint_state(stack);
        REQUIRE(state.size() == 2);
        CHECK(state[0] == 5.0);
        CHECK(state[1] == 0.0);
    }
    SUBCASE("linear ramp") {
        const double dt = 0.1;
        const auto series = sampled(dt, 11, [](double t) { return t; });
        const auto stack = differentiate(series, dt, 2);
        const auto state = endpoint_state(stack);
        const double t_last = dt * static_cast<double>(10 - stack.valid_offset);
        CHECK(std::abs(state[0] - t_last) < 1e-10);
        CHECK(std::abs(state[1] - 1.0) < 1e-10);
    }
    SUBCASE("oscillator x-channel matches the analytic state") {
        auto spec = SystemSpecd::oscillator(0.0, -1.0, 1.0, 0.0);
        Vector<double> x0(2);
        x0 << 1.0, 0.0;
        const double dt = 0.01;
        const auto sim = integrate(spec, x0, dt, 500);
        const auto stack = differentiate(Vector<double>(sim.values.col(0)), dt, 2);
        const auto state = endpoint_state(stack);
        const double t = dt * static_cast<double>(500 - stack.valid_offset);
        CHECK(std::abs(state[0] - std::cos(t)) < 1e-3);  // x
        CHECK(std::abs(state[1] + std::sin(t)) < 1e-3);  // x'
    }
}

TEST_CASE("differentiate rejects bad input") {
    CHECK_THROWS_AS(differentiate(Vector<double>::Ones(5), 0.1, 2), std::invalid_argument);
    CHECK_THROWS_AS(differentiate(Vector<double>::Ones(100), 0.0, 2), std::invalid_argument);
    CHECK_THROWS_AS(differentiate(Vector<double>::Ones(100), 0.1, 5), std::invalid_argument);
    CHECK_THROWS_AS(differentiate(Vector<double>::Ones(100), 0.1, -1), std::invalid_argument);
    Vector<double> bad = Vector<double>::Ones(100);
    bad[50] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(differentiate(bad, 0.1, 2), std::invalid_argument);
}
