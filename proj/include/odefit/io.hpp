#pragma once

#include "odefit/core.hpp"
#include "odefit/dynamics.hpp"
#include "odefit/evaluate.hpp"
#include "odefit/model.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

namespace odefit {

namespace detail {

// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double value) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

inline double parse_double(const std::string& token) {
    double value = 0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t')) --last;
    const auto result = std::from_chars(first, last, value);
    if (result.ec != std::errc{} || result.ptr != last)
        throw std::invalid_argument("could not parse number '" + token + "'");
    return value;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    return out;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    return in;
}

}  // namespace detail

/// CSV with header `t,<channel names...>`; one row per sample, values written
/// in shortest round-trip form so read-back is bitwise identical.
inline void write_timeseries_csv(const std::string& path, const TimeSeries<double>& ts) {
    auto out = detail::open_output(path);
    out << "t";
    for (const auto& name : ts.channel_names) out << ',' << name;
    out << '\n';
    for (Index i = 0; i < ts.samples(); ++i) {
        out << detail::format_double(ts.t0 + static_cast<double>(i) * ts.dt);
        for (Index h = 0; h < ts.channels(); ++h)
            out << ',' << detail::format_double(ts.values(i, h));
        out << '\n';
    }
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

inline TimeSeries<double> read_timeseries_csv(const std::string& path) {
    auto in = detail::open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("'" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = detail::split_csv_line(line);
    if (header.size() < 2 || header[0] != "t")
        throw std::runtime_error("'" + path + "' lacks a `t,<channels>` header");

    TimeSeries<double> ts;
    ts.channel_names.assign(header.begin() + 1, header.end());
    const Index channels = static_cast<Index>(ts.channel_names.size());

    std::vector<double> times;
    std::vector<double> flat;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (static_cast<Index>(fields.size()) != channels + 1)
            throw std::runtime_error("'" + path + "': row with wrong column count");
        times.push_back(detail::parse_double(fields[0]));
        for (Index h = 0; h < channels; ++h)
            flat.push_back(detail::parse_double(fields[static_cast<std::size_t>(h) + 1]));
    }
    const Index rows = static_cast<Index>(times.size());
    if (rows < 2) throw std::runtime_error("'" + path + "': need at least two samples");
    ts.t0 = times[0];
    ts.dt = times[1] - times[0];  // uniform sampling assumed; dt taken from the first gap
    if (!(ts.dt > 0)) throw std::runtime_error("'" + path + "': time column must increase");
    ts.values.resize(rows, channels);
    for (Index i = 0; i < rows; ++i)
        for (Index h = 0; h < channels; ++h)
            ts.values(i, h) = flat[static_cast<std::size_t>(i * channels + h)];
    return ts;
}

/// CSV `horizon,prediction[,truth,smape]`; horizons past a divergence keep
/// their truth/smape columns but have an empty prediction field.
inline void write_forecast_csv(const std::string& path, const ForecastReport<double>& report) {
    auto out = detail::open_output(path);
    const bool scored = !report.truth.empty();
    out << (scored ? "horizon,prediction,truth,smape" : "horizon,prediction") << '\n';
    for (std::size_t i = 0; i < report.horizons.size(); ++i) {
        out << report.horizons[i] << ',';
        if (i < report.predictions.size()) out << detail::format_double(report.predictions[i]);
        if (scored)
            out << ',' << detail::format_double(report.truth[i]) << ','
                << detail::format_double(report.smape_by_horizon[i]);
        out << '\n';
    }
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

inline nlohmann::json model_to_json(const SparseOdeModel<double>& model) {
    nlohmann::json j;
    j["target_order"] = model.target_order;
    j["max_degree"] = model.max_degree;
    j["dt"] = model.dt;
    const auto names = model.variable_names();
    std::vector<std::string> monomial_names;
    monomial_names.reserve(model.monomials.size());
    for (const auto& m : model.monomials) monomial_names.push_back(format_monomial(m, names));
    j["monomials"] = monomial_names;
    j["coefficients"] = std::vector<double>(model.coefficients.begin(), model.coefficients.end());
    j["intercept"] = model.intercept;
    j["lambda_selected"] = model.provenance.lambda_selected;
    j["lambda_path"] = std::vector<double>(model.provenance.lambda_path.begin(),
                                           model.provenance.lambda_path.end());
    j["cv_mean_error"] = std::vector<double>(model.provenance.cv_mean_error.begin(),
                                             model.provenance.cv_mean_error.end());
    j["converged"] = model.provenance.converged;
    return j;
}

inline SparseOdeModel<double> model_from_json(const nlohmann::json& j) {
    SparseOdeModel<double> model;
    model.target_order = j.at("target_order").get<int>();
    model.max_degree = j.at("max_degree").get<int>();
    model.dt = j.at("dt").get<double>();
    if (model.target_order < 1 || model.max_degree < 1 || !(model.dt > 0))
        throw std::invalid_argument("model JSON: invalid target_order/max_degree/dt");

    // The monomial list is implied by (target_order, max_degree); the stored
    // names are checked against it rather than parsed.
    model.monomials = enumerate_monomials(model.target_order, model.max_degree);
    const auto names = model.variable_names();
    const auto stored = j.at("monomials").get<std::vector<std::string>>();
    if (stored.size() != model.monomials.size())
        throw std::invalid_argument("model JSON: monomial list has unexpected length");
    for (std::size_t k = 0; k < stored.size(); ++k)
        if (stored[k] != format_monomial(model.monomials[k], names))
            throw std::invalid_argument("model JSON: monomial order mismatch at index " +
                                        std::to_string(k));

    const auto coefs = j.at("coefficients").get<std::vector<double>>();
    if (coefs.size() != model.monomials.size())
        throw std::invalid_argument("model JSON: coefficient count mismatch");
    model.coefficients =
        Eigen::Map<const Vector<double>>(coefs.data(), static_cast<Index>(coefs.size()));
    model.intercept = j.at("intercept").get<double>();

    model.provenance.coefficients = model.coefficients;
    model.provenance.intercept = model.intercept;
    model.provenance.lambda_selected = j.at("lambda_selected").get<double>();
    const auto path = j.at("lambda_path").get<std::vector<double>>();
    model.provenance.lambda_path =
        Eigen::Map<const Vector<double>>(path.data(), static_cast<Index>(path.size()));
    const auto cv = j.at("cv_mean_error").get<std::vector<double>>();
    model.provenance.cv_mean_error =
        Eigen::Map<const Vector<double>>(cv.data(), static_cast<Index>(cv.size()));
    model.provenance.converged = j.at("converged").get<bool>();
    model.provenance.n_nonzero =
        static_cast<int>((model.coefficients.array() != 0.0).count());
    return model;
}

inline void write_model_json(const std::string& path, const SparseOdeModel<double>& model) {
    auto out = detail::open_output(path);
    out << model_to_json(model).dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

inline SparseOdeModel<double> read_model_json(const std::string& path) {
    auto in = detail::open_input(path);
    nlohmann::json j;
    in >> j;
    return model_from_json(j);
}

/// Flat per-seed scoring table for one target order: `seed,horizon,smape,fit_time`.
/// Failed seeds appear with the worst-case score 2.0 at every horizon so that
/// per-horizon means over this table equal the aggregated curves.
inline void write_experiment_csv(const std::string& path,
                                 const ExperimentResult<double>::PerOrder& group,
                                 const std::vector<int>& horizons) {
    auto out = detail::open_output(path);
    out << "seed,horizon,smape,fit_time\n";
    for (const auto& outcome : group.per_seed) {
        for (std::size_t i = 0; i < horizons.size(); ++i) {
            out << outcome.seed_index << ',' << horizons[i] << ',';
            if (outcome.failed)
                out << detail::format_double(kSmapeDivergedScore) << ",nan";
            else
                out << detail::format_double(outcome.report.smape_by_horizon[i]) << ','
                    << detail::format_double(outcome.fit_time_seconds);
            out << '\n';
        }
    }
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

inline nlohmann::json experiment_to_json(const ExperimentResult<double>& result) {
    nlohmann::json j;
    const auto& config = result.config;
    j["config"] = {
        {"system", to_string(config.system.kind)},
        {"params", std::vector<double>(config.system.params.begin(), config.system.params.end())},
        {"mode", config.mode == ExperimentMode::FullRecovery ? "full-recovery" : "latent-forecast"},
        {"observed_channel", config.observed_channel},
        {"n_seeds", config.n_seeds},
        {"series_length", config.series_length},
        {"dt", config.dt},
        {"target_orders", config.target_orders},
        {"max_degree", config.max_degree},
        {"max_horizon", config.horizons.empty() ? 0 : config.horizons.back()},
        {"seed", config.seed},
        {"lasso",
         {{"n_lambdas", config.lasso.n_lambdas},
          {"lambda_min_ratio", config.lasso.lambda_min_ratio},
          {"max_iter", config.lasso.max_iter},
          {"tol", config.lasso.tol},
          {"cv_folds", config.lasso.cv_folds}}},
    };
    j["by_order"] = nlohmann::json::array();
    for (const auto& group : result.by_order) {
        nlohmann::json g;
        g["target_order"] = group.target_order;
        g["mean_fit_time"] = group.mean_fit_time;
        if (!std::isnan(group.mean_coefficient_mse))
            g["mean_coefficient_mse"] = group.mean_coefficient_mse;
        if (group.mean_smape_by_horizon.size() > 0)
            g["mean_smape_by_horizon"] = std::vector<double>(
                group.mean_smape_by_horizon.begin(), group.mean_smape_by_horizon.end());
        g["per_seed"] = nlohmann::json::array();
        for (const auto& outcome : group.per_seed) {
            nlohmann::json s;
            s["seed"] = outcome.seed_index;
            s["failed"] = outcome.failed;
            if (outcome.failed) {
                s["failure_reason"] = outcome.failure_reason;
            } else {
                s["fit_time_seconds"] = outcome.fit_time_seconds;
                if (!std::isnan(outcome.coefficient_mse))
                    s["coefficient_mse"] = outcome.coefficient_mse;
                s["equations"] = nlohmann::json::array();
                for (const auto& eq : outcome.equations) {
                    nlohmann::json e;
                    e["target"] = eq.target_name;
                    e["monomials"] = eq.monomial_names;
                    e["coefficients"] = std::vector<double>(eq.fit.coefficients.begin(),
                                                            eq.fit.coefficients.end());
                    e["intercept"] = eq.fit.intercept;
                    e["lambda_selected"] = eq.fit.lambda_selected;
                    e["n_nonzero"] = eq.fit.n_nonzero;
                    e["converged"] = eq.fit.converged;
                    s["equations"].push_back(std::move(e));
                }
                if (outcome.report.diverged_at)
                    s["diverged_at_horizon_index"] = *outcome.report.diverged_at;
            }
            g["per_seed"].push_back(std::move(s));
        }
        j["by_order"].push_back(std::move(g));
    }
    return j;
}

inline void write_experiment_json(const std::string& path, const ExperimentResult<double>& result) {
    auto out = detail::open_output(path);
    out << experiment_to_json(result).dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace odefit
