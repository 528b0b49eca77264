#pragma once

#include "odefit/core.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace odefit {

enum class SystemKind { Oscillator, Rossler, Lorenz, RecoveredScalar };

inline std::string to_string(SystemKind kind) {
    switch (kind) {
        case SystemKind::Oscillator: return "oscillator";
        case SystemKind::Rossler: return "rossler";
        case SystemKind::Lorenz: return "lorenz";
        case SystemKind::RecoveredScalar: return "recovered-scalar";
    }
    return "unknown";
}

/// One of the benchmark dynamical systems, with its named coefficients.
///
/// Oscillator is the planar linear system d/dt (x,y) = ((a,b),(c,d))·(x,y).
/// Rossler uses the classic three-parameter form with constants (a,b,c);
/// Lorenz uses (sigma, rho, beta). RecoveredScalar marks a system whose
/// right-hand side lives in a fitted SparseOdeModel, not here.
template <typename Scalar = double>
struct SystemSpec {
    SystemKind kind = SystemKind::Lorenz;
    std::array<Scalar, 4> params{};  // meaning depends on kind, see factories
    int dim = 3;

    static SystemSpec oscillator(Scalar a, Scalar b, Scalar c, Scalar d) {
        SystemSpec s{SystemKind::Oscillator, {a, b, c, d}, 2};
        s.check_params(4);
        return s;
    }

    static SystemSpec rossler(Scalar a, Scalar b, Scalar c) {
        SystemSpec s{SystemKind::Rossler, {a, b, c, Scalar(0)}, 3};
        s.check_params(3);
        return s;
    }

    static SystemSpec lorenz(Scalar sigma, Scalar rho, Scalar beta) {
        SystemSpec s{SystemKind::Lorenz, {sigma, rho, beta, Scalar(0)}, 3};
        s.check_params(3);
        return s;
    }

    static SystemSpec recovered_scalar(int order) {
        if (order < 1) throw std::invalid_argument("recovered_scalar: order must be >= 1");
        return SystemSpec{SystemKind::RecoveredScalar, {}, order};
    }

    std::vector<std::string> channel_names() const {
        switch (kind) {
            case SystemKind::Oscillator: return {"x", "y"};
            case SystemKind::Rossler:
            case SystemKind::Lorenz: return {"x", "y", "z"};
            case SystemKind::RecoveredScalar: return {"f"};
        }
        return {};
    }

private:
    void check_params(int n_used) const {
        for (int i = 0; i < n_used; ++i)
            if (!std::isfinite(static_cast<double>(params[i])))
                throw std::invalid_argument("SystemSpec: non-finite parameter");
    }
};

using SystemSpecd = SystemSpec<double>;

/// Uniformly sampled multichannel observations: values(i, h) is channel h at
/// time t0 + i*dt.
template <typename Scalar = double>
struct TimeSeries {
    Scalar t0 = Scalar(0);
    Scalar dt = Scalar(1);
    Matrix<Scalar> values;  // T x H
    std::vector<std::string> channel_names;

    Index samples() const { return values.rows(); }
    Index channels() const { return values.cols(); }

    Index channel_index(const std::string& name) const {
        for (Index h = 0; h < static_cast<Index>(channel_names.size()); ++h)
            if (channel_names[static_cast<std::size_t>(h)] == name) return h;
        throw std::invalid_argument("TimeSeries: no channel named '" + name + "'");
    }
};

using TimeSeriesd = TimeSeries<double>;

/// Time derivative of `state` under the named system.
template <typename Scalar, typename Derived>
Vector<Scalar> rhs(const SystemSpec<Scalar>& spec, const Eigen::MatrixBase<Derived>& state) {
    static_assert(std::is_same_v<typename Derived::Scalar, Scalar>,
                  "state scalar type must match the system spec");
    if (state.size() != spec.dim)
        throw std::invalid_argument("rhs: state dimension does not match system");
    Vector<Scalar> out(spec.dim);
    switch (spec.kind) {
        case SystemKind::Oscillator: {
            const Scalar a = spec.params[0], b = spec.params[1];
            const Scalar c = spec.params[2], d = spec.params[3];
            out[0] = a * state[0] + b * state[1];
            out[1] = c * state[0] + d * state[1];
            break;
        }
        case SystemKind::Rossler: {
            const Scalar a = spec.params[0], b = spec.params[1], c = spec.params[2];
            out[0] = -state[1] - state[2];
            out[1] = state[0] + a * state[1];
            out[2] = b + state[2] * (state[0] - c);
            break;
        }
        case SystemKind::Lorenz: {
            const Scalar sigma = spec.params[0], rho = spec.params[1], beta = spec.params[2];
            out[0] = sigma * (state[1] - state[0]);
            out[1] = state[0] * (rho - state[2]) - state[1];
            out[2] = state[0] * state[1] - beta * state[2];
            break;
        }
        case SystemKind::RecoveredScalar:
            throw std::invalid_argument(
                "rhs: recovered-scalar dynamics are defined by a SparseOdeModel");
    }
    return out;
}

/// Classical fixed-step RK4 over any callable rhs. Returns steps+1 samples,
/// row 0 being x0 exactly. Throws IntegrationDivergedError when a step
/// produces a non-finite state.
template <typename Rhs, typename Derived>
Matrix<typename Derived::Scalar> integrate_rk4(Rhs&& f, const Eigen::MatrixBase<Derived>& x0,
                                               typename Derived::Scalar dt, Index steps) {
    using Scalar = typename Derived::Scalar;
    if (!(dt > Scalar(0))) throw std::invalid_argument("integrate: dt must be positive");
    if (steps < 1) throw std::invalid_argument("integrate: steps must be >= 1");
    Vector<Scalar> x = x0;
    if (!all_finite(x)) throw std::invalid_argument("integrate: non-finite initial state");

    const Index dim = x.size();
    Matrix<Scalar> out(steps + 1, dim);
    out.row(0) = x.transpose();

    Vector<Scalar> k1(dim), k2(dim), k3(dim), k4(dim);
    const Scalar half = dt / Scalar(2);
    for (Index i = 1; i <= steps; ++i) {
        k1 = f(x);
        k2 = f(Vector<Scalar>(x + half * k1));
        k3 = f(Vector<Scalar>(x + half * k2));
        k4 = f(Vector<Scalar>(x + dt * k3));
        x += (dt / Scalar(6)) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
        if (!all_finite(x))
            throw IntegrationDivergedError(
                "integration diverged at step " + std::to_string(i), i - 1);
        out.row(i) = x.transpose();
    }
    return out;
}

/// Simulate a named system from x0 for a fixed number of RK4 steps.
template <typename Scalar, typename Derived>
TimeSeries<Scalar> integrate(const SystemSpec<Scalar>& spec, const Eigen::MatrixBase<Derived>& x0,
                             Scalar dt, Index steps, Scalar t0 = Scalar(0)) {
    static_assert(std::is_same_v<typename Derived::Scalar, Scalar>,
                  "initial state scalar type must match the system spec");
    if (x0.size() != spec.dim)
        throw std::invalid_argument("integrate: initial state dimension does not match system");
    TimeSeries<Scalar> ts;
    ts.t0 = t0;
    ts.dt = dt;
    ts.channel_names = spec.channel_names();
    ts.values = integrate_rk4([&spec](const Vector<Scalar>& x) { return rhs(spec, x); },
                              x0, dt, steps);
    return ts;
}

namespace detail {

// Standard-normal stream: Box-Muller over the raw mt19937_64 output.
// Self-contained so that seeded draws are identical across standard
// libraries, which keeps experiment outputs reproducible everywhere.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1], u2 in [0, 1)
        const double u1 = (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::mt19937_64 rng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace detail

/// `count` i.i.d. N(0, I_dim) vectors, deterministic given seed. Vectors are
/// drawn sequentially, so the first k vectors do not depend on count.
template <typename Scalar = double>
std::vector<Vector<Scalar>> sample_initial_conditions(int dim, int count, std::uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("sample_initial_conditions: dim must be >= 1");
    if (count < 1) throw std::invalid_argument("sample_initial_conditions: count must be >= 1");
    detail::NormalStream stream(seed);
    std::vector<Vector<Scalar>> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        Vector<Scalar> v(dim);
        for (int i = 0; i < dim; ++i) v[i] = static_cast<Scalar>(stream.next());
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace odefit
