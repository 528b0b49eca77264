#pragma once

#include "odefit/core.hpp"
#include "odefit/dictionary.hpp"
#include "odefit/differentiate.hpp"
#include "odefit/dynamics.hpp"
#include "odefit/lasso.hpp"
#include "odefit/model.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace odefit {

namespace detail {

// Kahan compensated summation; keeps seed-wise means independent of any
// future reordering of the accumulation.
template <typename Scalar>
class KahanSum {
public:
    void add(Scalar x) {
        const Scalar y = x - compensation_;
        const Scalar t = sum_ + y;
        compensation_ = (t - sum_) - y;
        sum_ = t;
    }
    Scalar value() const { return sum_; }

private:
    Scalar sum_ = Scalar(0);
    Scalar compensation_ = Scalar(0);
};

template <typename Scalar>
Scalar smape_term(Scalar actual, Scalar predicted) {
    const Scalar denom = (std::abs(actual) + std::abs(predicted)) / Scalar(2);
    if (denom == Scalar(0)) return Scalar(0);  // both zero: exact agreement
    return std::abs(predicted - actual) / denom;
}

}  // namespace detail

inline constexpr double kSmapeDivergedScore = 2.0;  // per-point worst case

/// Symmetric mean absolute percentage error, bounded in [0, 2].
template <typename DerivedA, typename DerivedF>
typename DerivedA::Scalar smape(const Eigen::MatrixBase<DerivedA>& truth,
                                const Eigen::MatrixBase<DerivedF>& forecast_values) {
    using Scalar = typename DerivedA::Scalar;
    if (truth.size() != forecast_values.size())
        throw std::invalid_argument("smape: length mismatch");
    if (truth.size() == 0) throw std::invalid_argument("smape: empty input");
    detail::KahanSum<Scalar> sum;
    for (Index t = 0; t < truth.size(); ++t)
        sum.add(detail::smape_term<Scalar>(truth(t), forecast_values(t)));
    return sum.value() / static_cast<Scalar>(truth.size());
}

/// Baseline that predicts the mean of the last `window` observations for
/// every horizon.
template <typename Derived>
Vector<typename Derived::Scalar> naive_forecast(const Eigen::MatrixBase<Derived>& series,
                                                Index window, const std::vector<int>& horizons) {
    using Scalar = typename Derived::Scalar;
    if (window < 1) throw std::invalid_argument("naive_forecast: window must be >= 1");
    if (series.size() < window)
        throw std::invalid_argument("naive_forecast: series shorter than window");
    const Scalar level = series.tail(window).sum() / static_cast<Scalar>(window);
    return Vector<Scalar>::Constant(static_cast<Index>(horizons.size()), level);
}

/// Attach held-out truth to a forecast and fill the cumulative SMAPE curve:
/// entry i averages the pointwise symmetric errors over horizons 0..i, so for
/// dense horizons 1..H it equals the SMAPE at time horizon i+1. Horizons past
/// a divergence score the worst-case 2.0 per point.
template <typename Scalar>
void attach_truth(ForecastReport<Scalar>& report, const std::vector<Scalar>& truth) {
    if (truth.size() != report.horizons.size())
        throw std::invalid_argument("attach_truth: truth length does not match horizons");
    report.truth = truth;
    report.smape_by_horizon.resize(truth.size());
    detail::KahanSum<Scalar> running;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const Scalar term = i < report.predictions.size()
                                ? detail::smape_term(truth[i], report.predictions[i])
                                : Scalar(kSmapeDivergedScore);
        running.add(term);
        report.smape_by_horizon[i] = running.value() / static_cast<Scalar>(i + 1);
    }
}

enum class ExperimentMode {
    LatentForecast,  // observe one channel, fit higher-order targets, forecast
    FullRecovery,    // observe all channels, fit first-order system, compare coefficients
};

template <typename Scalar = double>
struct ExperimentConfig {
    SystemSpec<Scalar> system;
    ExperimentMode mode = ExperimentMode::LatentForecast;
    int observed_channel = 0;
    int n_seeds = 20;
    Index series_length = 5000;
    Scalar dt = Scalar(0.01);
    std::vector<int> target_orders = {2};
    int max_degree = 3;
    std::vector<int> horizons;  // dense 1..H so cumulative SMAPE matches the horizon definition
    LassoConfig<Scalar> lasso;
    std::uint64_t seed = 1;
};

using ExperimentConfigd = ExperimentConfig<double>;

/// One fitted equation: the latent target f^(n), or one channel's first
/// derivative in FullRecovery mode.
template <typename Scalar = double>
struct FittedEquation {
    std::string target_name;
    std::vector<std::string> monomial_names;
    LassoFit<Scalar> fit;
};

template <typename Scalar = double>
struct SeedOutcome {
    int seed_index = 0;
    std::vector<FittedEquation<Scalar>> equations;
    ForecastReport<Scalar> report;  // LatentForecast mode only
    Scalar fit_time_seconds = Scalar(0);
    Scalar coefficient_mse = std::numeric_limits<Scalar>::quiet_NaN();  // FullRecovery mode
    bool failed = false;
    std::string failure_reason;
};

template <typename Scalar = double>
struct ExperimentResult {
    struct PerOrder {
        int target_order = 0;
        std::vector<SeedOutcome<Scalar>> per_seed;
        Vector<Scalar> mean_smape_by_horizon;  // failed/diverged points scored 2.0
        Scalar mean_fit_time = Scalar(0);
        Scalar mean_coefficient_mse = std::numeric_limits<Scalar>::quiet_NaN();
    };
    ExperimentConfig<Scalar> config;
    std::vector<PerOrder> by_order;
};

using ExperimentResultd = ExperimentResult<double>;

/// Nonzero dictionary coefficients of the named first-order systems, keyed by
/// monomial display name over the channel variables; one map per channel
/// equation. The reference for coefficient-recovery scoring.
template <typename Scalar>
std::vector<std::map<std::string, Scalar>> true_system_coefficients(const SystemSpec<Scalar>& spec) {
    using CoefMap = std::map<std::string, Scalar>;
    switch (spec.kind) {
        case SystemKind::Oscillator: {
            const Scalar a = spec.params[0], b = spec.params[1];
            const Scalar c = spec.params[2], d = spec.params[3];
            return {CoefMap{{"x", a}, {"y", b}}, CoefMap{{"x", c}, {"y", d}}};
        }
        case SystemKind::Rossler: {
            const Scalar a = spec.params[0], b = spec.params[1], c = spec.params[2];
            return {CoefMap{{"y", Scalar(-1)}, {"z", Scalar(-1)}},
                    CoefMap{{"x", Scalar(1)}, {"y", a}},
                    CoefMap{{"1", b}, {"x * z", Scalar(1)}, {"z", -c}}};
        }
        case SystemKind::Lorenz: {
            const Scalar sigma = spec.params[0], rho = spec.params[1], beta = spec.params[2];
            return {CoefMap{{"x", -sigma}, {"y", sigma}},
                    CoefMap{{"x", rho}, {"y", Scalar(-1)}, {"x * z", Scalar(-1)}},
                    CoefMap{{"x * y", Scalar(1)}, {"z", -beta}}};
        }
        case SystemKind::RecoveredScalar:
            throw std::invalid_argument("true_system_coefficients: not a named benchmark system");
    }
    throw std::invalid_argument("true_system_coefficients: unknown system kind");
}

namespace detail {

template <typename Scalar>
void validate_experiment_config(const ExperimentConfig<Scalar>& config) {
    config.lasso.validate();
    if (config.n_seeds < 1)
        throw std::invalid_argument("run_experiment: n_seeds must be >= 1");
    if (config.target_orders.empty())
        throw std::invalid_argument("run_experiment: no target orders given");
    int max_order = 0;
    for (int n : config.target_orders) {
        if (n < 1 || n > kMaxDerivativeOrder)
            throw std::invalid_argument("run_experiment: target order out of range");
        max_order = std::max(max_order, n);
    }
    if (config.series_length <= 2 * static_cast<Index>(max_order) + 1)
        throw std::invalid_argument("run_experiment: series_length too short");
    if (config.mode == ExperimentMode::LatentForecast) {
        if (config.horizons.empty())
            throw std::invalid_argument("run_experiment: horizons required for forecasting");
        if (config.observed_channel < 0 || config.observed_channel >= config.system.dim)
            throw std::invalid_argument("run_experiment: observed channel out of range");
    }
}

// Latent pipeline for one (seed, target order) cell.
template <typename Scalar>
SeedOutcome<Scalar> run_latent_cell(const ExperimentConfig<Scalar>& config,
                                    const Vector<Scalar>& observed, int target_order,
                                    int seed_index) {
    SeedOutcome<Scalar> outcome;
    outcome.seed_index = seed_index;

    const int max_h = config.horizons.back();
    const Index n_train = observed.size() - max_h;
    if (n_train <= 2 * static_cast<Index>(target_order) + 1)
        throw std::invalid_argument("run_experiment: training window too short after holdout");

    const auto stack = differentiate(observed.head(n_train), config.dt, target_order);
    const auto features = build_features(stack, target_order, config.max_degree);

    const auto t_start = std::chrono::steady_clock::now();
    const auto fit = fit_cv(features, config.lasso);
    const auto t_stop = std::chrono::steady_clock::now();
    outcome.fit_time_seconds =
        std::chrono::duration_cast<std::chrono::duration<Scalar>>(t_stop - t_start).count();

    outcome.equations.push_back(FittedEquation<Scalar>{
        "f" + std::string(static_cast<std::size_t>(target_order), '\''),
        features.monomial_names(), fit});

    const auto model = make_model(features, fit, target_order, config.max_degree, config.dt);

    // The stack's last valid sample sits valid_offset steps before the end of
    // the training window; shift so that horizon h lands on test sample h.
    std::vector<int> shifted(config.horizons);
    for (int& h : shifted) h += static_cast<int>(stack.valid_offset);
    outcome.report = forecast(model, stack, shifted);
    outcome.report.horizons = config.horizons;

    std::vector<Scalar> truth(config.horizons.size());
    for (std::size_t i = 0; i < config.horizons.size(); ++i)
        truth[i] = observed[n_train - 1 + config.horizons[i]];
    attach_truth(outcome.report, truth);
    return outcome;
}

// FullRecovery pipeline for one seed: per-channel first-order fits over the
// multivariate dictionary, scored by coefficient MSE against the true system.
template <typename Scalar>
SeedOutcome<Scalar> run_recovery_cell(const ExperimentConfig<Scalar>& config,
                                      const TimeSeries<Scalar>& sim, int seed_index) {
    SeedOutcome<Scalar> outcome;
    outcome.seed_index = seed_index;

    const Index channels = sim.channels();
    std::vector<DerivativeStack<Scalar>> stacks;
    stacks.reserve(static_cast<std::size_t>(channels));
    for (Index h = 0; h < channels; ++h)
        stacks.push_back(differentiate(sim.values.col(h), config.dt, 1));

    Matrix<Scalar> base(stacks[0].rows(), channels);
    for (Index h = 0; h < channels; ++h)
        base.col(h) = stacks[static_cast<std::size_t>(h)].columns.col(0);

    const auto truth_maps = true_system_coefficients(config.system);
    KahanSum<Scalar> mse_sum;
    Scalar fit_seconds = Scalar(0);
    for (Index h = 0; h < channels; ++h) {
        const auto features =
            build_features(base, sim.channel_names,
                           stacks[static_cast<std::size_t>(h)].columns.col(1), config.max_degree);

        const auto t_start = std::chrono::steady_clock::now();
        const auto fit = fit_cv(features, config.lasso);
        const auto t_stop = std::chrono::steady_clock::now();
        fit_seconds +=
            std::chrono::duration_cast<std::chrono::duration<Scalar>>(t_stop - t_start).count();

        outcome.equations.push_back(FittedEquation<Scalar>{
            sim.channel_names[static_cast<std::size_t>(h)] + "'",
            features.monomial_names(), fit});
        mse_sum.add(coefficient_mse(to_coefficient_map(fit, features),
                                    truth_maps[static_cast<std::size_t>(h)]));
    }
    outcome.fit_time_seconds = fit_seconds;
    outcome.coefficient_mse = mse_sum.value() / static_cast<Scalar>(channels);
    return outcome;
}

}  // namespace detail

/// The multi-seed protocol: per seed, simulate from a standard-normal initial
/// condition, hold out the last max(horizons) samples, fit each target order
/// on the training window, forecast the holdout and score it. Per-seed
/// failures are recorded in that seed's entry and scored as fully diverged;
/// the batch never aborts.
template <typename Scalar>
ExperimentResult<Scalar> run_experiment(const ExperimentConfig<Scalar>& config) {
    detail::validate_experiment_config(config);

    ExperimentResult<Scalar> result;
    result.config = config;

    const auto initial_conditions =
        sample_initial_conditions<Scalar>(config.system.dim, config.n_seeds, config.seed);

    const std::vector<int> orders = config.mode == ExperimentMode::FullRecovery
                                        ? std::vector<int>{1}
                                        : config.target_orders;
    for (int order : orders) {
        typename ExperimentResult<Scalar>::PerOrder group;
        group.target_order = order;
        result.by_order.push_back(std::move(group));
    }

    for (int s = 0; s < config.n_seeds; ++s) {
        TimeSeries<Scalar> sim;
        bool sim_ok = true;
        std::string sim_failure;
        try {
            sim = integrate(config.system, initial_conditions[static_cast<std::size_t>(s)],
                            config.dt, config.series_length - 1);
        } catch (const std::exception& e) {
            sim_ok = false;
            sim_failure = e.what();
        }

        for (std::size_t g = 0; g < result.by_order.size(); ++g) {
            auto& group = result.by_order[g];
            SeedOutcome<Scalar> outcome;
            outcome.seed_index = s;
            if (!sim_ok) {
                outcome.failed = true;
                outcome.failure_reason = sim_failure;
            } else {
                try {
                    outcome = config.mode == ExperimentMode::FullRecovery
                                  ? detail::run_recovery_cell(config, sim, s)
                                  : detail::run_latent_cell(
                                        config,
                                        Vector<Scalar>(sim.values.col(config.observed_channel)),
                                        group.target_order, s);
                } catch (const std::exception& e) {
                    outcome = SeedOutcome<Scalar>{};
                    outcome.seed_index = s;
                    outcome.failed = true;
                    outcome.failure_reason = e.what();
                }
            }
            group.per_seed.push_back(std::move(outcome));
        }
    }

    // Aggregate.
    for (auto& group : result.by_order) {
        detail::KahanSum<Scalar> time_sum, mse_sum;
        int n_timed = 0, n_mse = 0;
        if (config.mode == ExperimentMode::LatentForecast) {
            const auto n_h = static_cast<Index>(config.horizons.size());
            group.mean_smape_by_horizon.resize(n_h);
            for (Index i = 0; i < n_h; ++i) {
                detail::KahanSum<Scalar> acc;
                for (const auto& outcome : group.per_seed)
                    acc.add(outcome.failed
                                ? Scalar(kSmapeDivergedScore)
                                : outcome.report.smape_by_horizon[static_cast<std::size_t>(i)]);
                group.mean_smape_by_horizon[i] = acc.value() / static_cast<Scalar>(config.n_seeds);
            }
        }
        for (const auto& outcome : group.per_seed) {
            if (outcome.failed) continue;
            time_sum.add(outcome.fit_time_seconds);
            ++n_timed;
            if (config.mode == ExperimentMode::FullRecovery) {
                mse_sum.add(outcome.coefficient_mse);
                ++n_mse;
            }
        }
        group.mean_fit_time = n_timed > 0 ? time_sum.value() / static_cast<Scalar>(n_timed)
                                          : std::numeric_limits<Scalar>::quiet_NaN();
        if (config.mode == ExperimentMode::FullRecovery)
            group.mean_coefficient_mse = n_mse > 0
                                             ? mse_sum.value() / static_cast<Scalar>(n_mse)
                                             : std::numeric_limits<Scalar>::quiet_NaN();
    }
    return result;
}

/// Canned experiment configurations, one per benchmark scenario.
inline std::vector<std::string> experiment_preset_names() {
    return {"oscillator-x", "rossler-y", "rossler-x", "lorenz-x", "lorenz-full"};
}

template <typename Scalar = double>
ExperimentConfig<Scalar> experiment_preset(const std::string& name) {
    ExperimentConfig<Scalar> config;
    auto dense_horizons = [](int max_h) {
        std::vector<int> h(static_cast<std::size_t>(max_h));
        for (int i = 0; i < max_h; ++i) h[static_cast<std::size_t>(i)] = i + 1;
        return h;
    };
    if (name == "oscillator-x") {
        config.system = SystemSpec<Scalar>::oscillator(Scalar(0.1), Scalar(-1), Scalar(1), Scalar(0));
        config.observed_channel = 0;
        config.target_orders = {2};
        config.horizons = dense_horizons(150);
    } else if (name == "rossler-y") {
        config.system = SystemSpec<Scalar>::rossler(Scalar(0.52), Scalar(2), Scalar(4));
        config.observed_channel = 1;
        config.target_orders = {2, 3};
        config.horizons = dense_horizons(150);
    } else if (name == "rossler-x") {
        config.system = SystemSpec<Scalar>::rossler(Scalar(0.52), Scalar(2), Scalar(4));
        config.observed_channel = 0;
        config.target_orders = {2, 3};
        config.horizons = dense_horizons(150);
    } else if (name == "lorenz-x") {
        config.system = SystemSpec<Scalar>::lorenz(Scalar(10), Scalar(28), Scalar(8) / Scalar(3));
        config.observed_channel = 0;
        config.target_orders = {2, 3};
        config.horizons = dense_horizons(100);
    } else if (name == "lorenz-full") {
        config.system = SystemSpec<Scalar>::lorenz(Scalar(10), Scalar(28), Scalar(8) / Scalar(3));
        config.mode = ExperimentMode::FullRecovery;
        config.target_orders = {1};
        config.max_degree = 2;
        // Coefficients up to rho=28 on large-scale columns need a deeper
        // penalty grid than the generic default before shrinkage bias stops
        // dominating the recovery error.
        config.lasso.lambda_min_ratio = Scalar(1e-5);
    } else {
        throw std::invalid_argument("unknown experiment preset '" + name + "'");
    }
    return config;
}

}  // namespace odefit
