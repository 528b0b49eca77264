// Command-line front end: simulate the benchmark systems, fit sparse ODE
// models to CSV series, forecast, score, and run the full experiment
// protocol from presets or a key=value config file.

#include "odefit/dictionary.hpp"
#include "odefit/differentiate.hpp"
#include "odefit/dynamics.hpp"
#include "odefit/evaluate.hpp"
#include "odefit/io.hpp"
#include "odefit/lasso.hpp"
#include "odefit/model.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumeric = 1;  // integration diverged where not tolerated
constexpr int kExitUsage = 2;    // bad flags, unreadable/invalid inputs

using odefit::Index;

std::vector<int> dense_horizons(int max_h) {
    if (max_h < 1) throw std::invalid_argument("horizon must be >= 1");
    std::vector<int> h(static_cast<std::size_t>(max_h));
    for (int i = 0; i < max_h; ++i) h[static_cast<std::size_t>(i)] = i + 1;
    return h;
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (token.empty()) continue;
        values.push_back(odefit::detail::parse_double(token));
    }
    if (values.empty()) throw std::invalid_argument("empty number list '" + text + "'");
    return values;
}

odefit::Vector<double> select_channel(const odefit::TimeSeries<double>& ts,
                                       const std::string& channel) {
    if (channel.empty()) {
        if (ts.channels() != 1)
            throw std::invalid_argument(
                "input has several channels; pick one with --channel");
        return ts.values.col(0);
    }
    return ts.values.col(ts.channel_index(channel));
}

void print_fit_summary(std::ostream& out, const odefit::SparseOdeModel<double>& model) {
    out << "  " << model.equation_string() << "\n";
    out << "  lambda_selected = " << model.provenance.lambda_selected
        << ", nonzero terms = " << model.provenance.n_nonzero
        << ", converged = " << (model.provenance.converged ? "yes" : "no") << "\n";
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
    std::string system;
    double a = 0.1, b = -1.0, c = 1.0, d = 0.0;
    double sigma = 10.0, rho = 28.0, beta = 8.0 / 3.0;
    double dt = 0.01;
    long steps = 5000;
    double t0 = 0.0;
    std::string x0_text;
    std::uint64_t seed = 0;
    bool seeded = false;
    std::string output;
};

int run_simulate(const SimulateOptions& opt) {
    odefit::SystemSpec<double> spec;
    if (opt.system == "oscillator")
        spec = odefit::SystemSpec<double>::oscillator(opt.a, opt.b, opt.c, opt.d);
    else if (opt.system == "rossler")
        spec = odefit::SystemSpec<double>::rossler(opt.a, opt.b, opt.c);
    else if (opt.system == "lorenz")
        spec = odefit::SystemSpec<double>::lorenz(opt.sigma, opt.rho, opt.beta);
    else
        throw std::invalid_argument("unknown system '" + opt.system +
                                    "' (expected oscillator, rossler or lorenz)");

    odefit::Vector<double> x0;
    if (!opt.x0_text.empty()) {
        const auto values = parse_number_list(opt.x0_text);
        if (static_cast<int>(values.size()) != spec.dim)
            throw std::invalid_argument("--x0 needs " + std::to_string(spec.dim) + " values");
        x0 = Eigen::Map<const odefit::Vector<double>>(values.data(),
                                                       static_cast<Index>(values.size()));
    } else {
        x0 = odefit::sample_initial_conditions<double>(spec.dim, 1, opt.seed)[0];
    }

    const auto ts = odefit::integrate(spec, x0, opt.dt, opt.steps, opt.t0);
    odefit::write_timeseries_csv(opt.output, ts);
    std::cout << "wrote " << ts.samples() << " samples x " << ts.channels()
              << " channels to " << opt.output << "\n";
    return kExitOk;
}

// --------------------------------------------------------------------- fit

struct FitOptions {
    std::string input;
    std::string channel;
    bool all_channels = false;
    int target_order = 2;
    int degree = 3;
    odefit::LassoConfig<double> lasso;
    std::string output;
};

int run_fit(const FitOptions& opt) {
    const auto ts = odefit::read_timeseries_csv(opt.input);

    if (opt.all_channels) {
        if (opt.target_order != 1)
            throw std::invalid_argument("--all-channels requires --target-order 1");
        std::vector<odefit::DerivativeStack<double>> stacks;
        for (Index h = 0; h < ts.channels(); ++h)
            stacks.push_back(odefit::differentiate(ts.values.col(h), ts.dt, 1));
        odefit::Matrix<double> base(stacks[0].rows(), ts.channels());
        for (Index h = 0; h < ts.channels(); ++h)
            base.col(h) = stacks[static_cast<std::size_t>(h)].columns.col(0);

        nlohmann::json out_json;
        out_json["dt"] = ts.dt;
        out_json["max_degree"] = opt.degree;
        std::cout << "recovered system:\n";
        for (Index h = 0; h < ts.channels(); ++h) {
            const auto features = odefit::build_features(
                base, ts.channel_names, stacks[static_cast<std::size_t>(h)].columns.col(1),
                opt.degree);
            const auto fit = odefit::fit_cv(features, opt.lasso);
            const auto& name = ts.channel_names[static_cast<std::size_t>(h)];

            nlohmann::json eq;
            eq["monomials"] = features.monomial_names();
            eq["coefficients"] =
                std::vector<double>(fit.coefficients.begin(), fit.coefficients.end());
            eq["intercept"] = fit.intercept;
            eq["lambda_selected"] = fit.lambda_selected;
            eq["converged"] = fit.converged;
            out_json["channels"][name] = std::move(eq);

            std::cout << "  " << name << "' =";
            bool first = true;
            const auto names = features.monomial_names();
            for (std::size_t k = 0; k < names.size(); ++k) {
                const double c = fit.coefficients[static_cast<Index>(k)];
                if (c == 0.0) continue;
                std::cout << (first ? " " : " + ") << c << "*" << names[k];
                first = false;
            }
            if (fit.intercept != 0.0) std::cout << (first ? " " : " + ") << fit.intercept;
            std::cout << "\n";
        }
        std::ofstream out(opt.output);
        if (!out) throw std::runtime_error("cannot open '" + opt.output + "' for writing");
        out << out_json.dump(2) << '\n';
        return kExitOk;
    }

    const odefit::Vector<double> series = select_channel(ts, opt.channel);
    const auto stack = odefit::differentiate(series, ts.dt, opt.target_order);
    const auto features = odefit::build_features(stack, opt.target_order, opt.degree);
    const auto fit = odefit::fit_cv(features, opt.lasso);
    const auto model =
        odefit::make_model(features, fit, opt.target_order, opt.degree, ts.dt);
    odefit::write_model_json(opt.output, model);
    std::cout << "fitted model written to " << opt.output << "\n";
    print_fit_summary(std::cout, model);
    return kExitOk;
}

// ---------------------------------------------------------------- forecast

struct ForecastOptions {
    std::string model_path;
    std::string input;
    std::string channel;
    int max_horizon = 100;
    bool holdout = false;
    std::string output;
};

int run_forecast(const ForecastOptions& opt) {
    const auto model = odefit::read_model_json(opt.model_path);
    const auto ts = odefit::read_timeseries_csv(opt.input);
    if (std::abs(ts.dt - model.dt) > 1e-9 * std::max(1.0, std::abs(model.dt)))
        throw std::invalid_argument("dt mismatch: model was fitted at dt=" +
                                    std::to_string(model.dt) + " but input is sampled at dt=" +
                                    std::to_string(ts.dt));

    const odefit::Vector<double> series = select_channel(ts, opt.channel);
    const auto horizons = dense_horizons(opt.max_horizon);

    const Index n_train = opt.holdout ? series.size() - opt.max_horizon : series.size();
    if (n_train <= 2 * static_cast<Index>(model.target_order) + 1)
        throw std::invalid_argument("series too short for the requested holdout");

    const auto stack =
        odefit::differentiate(series.head(n_train), ts.dt, model.target_order);
    // Horizon h counts steps past the end of the (training) window; the
    // integration starts valid_offset samples earlier, where the stack ends.
    std::vector<int> shifted(horizons);
    for (int& h : shifted) h += static_cast<int>(stack.valid_offset);
    auto report = odefit::forecast(model, stack, shifted);
    report.horizons = horizons;

    if (opt.holdout) {
        std::vector<double> truth(horizons.size());
        for (std::size_t i = 0; i < horizons.size(); ++i)
            truth[i] = series[n_train - 1 + horizons[i]];
        odefit::attach_truth(report, truth);
    }
    odefit::write_forecast_csv(opt.output, report);
    std::cout << "wrote " << report.horizons.size() << " horizon rows to " << opt.output;
    if (report.diverged_at)
        std::cout << " (diverged at horizon index " << *report.diverged_at << ")";
    std::cout << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateOptions {
    std::string forecast_path;
    std::string truth_path;
    std::string channel;
    std::string output;
    int naive_window = 0;  // 0 disables the baseline column
};

int run_evaluate(const EvaluateOptions& opt) {
    // Forecast CSV: horizon,prediction[,...]; horizons must be dense 1..H so
    // the cumulative SMAPE matches the time-horizon definition.
    auto in = odefit::detail::open_input(opt.forecast_path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("'" + opt.forecast_path + "' is empty");
    odefit::ForecastReport<double> report;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = odefit::detail::split_csv_line(line);
        if (fields.size() < 2)
            throw std::runtime_error("'" + opt.forecast_path + "': malformed row");
        report.horizons.push_back(static_cast<int>(odefit::detail::parse_double(fields[0])));
        if (!fields[1].empty())
            report.predictions.push_back(odefit::detail::parse_double(fields[1]));
    }
    if (report.horizons.empty())
        throw std::runtime_error("'" + opt.forecast_path + "' has no horizon rows");
    if (report.predictions.size() < report.horizons.size())
        report.diverged_at = static_cast<int>(report.predictions.size());

    const auto ts = odefit::read_timeseries_csv(opt.truth_path);
    const odefit::Vector<double> series = select_channel(ts, opt.channel);
    const int max_h = report.horizons.back();
    if (series.size() < max_h)
        throw std::invalid_argument("truth series shorter than the forecast horizon");
    // The last max-horizon samples of the truth series are the holdout window.
    std::vector<double> truth(report.horizons.size());
    for (std::size_t i = 0; i < report.horizons.size(); ++i)
        truth[i] = series[series.size() - max_h - 1 + report.horizons[i]];
    odefit::attach_truth(report, truth);

    // Optional reference: predict the mean of the last `window` samples that
    // precede the holdout, for every horizon.
    odefit::ForecastReport<double> naive_report;
    if (opt.naive_window > 0) {
        const Index train_len = series.size() - max_h;
        if (train_len < opt.naive_window)
            throw std::invalid_argument("naive window longer than the pre-holdout series");
        const auto level = odefit::naive_forecast(series.head(train_len),
                                                  opt.naive_window, report.horizons);
        naive_report.horizons = report.horizons;
        naive_report.predictions.assign(level.begin(), level.end());
        odefit::attach_truth(naive_report, truth);
    }

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!opt.output.empty()) {
        file.open(opt.output);
        if (!file) throw std::runtime_error("cannot open '" + opt.output + "' for writing");
        out = &file;
    }
    *out << (opt.naive_window > 0 ? "horizon,smape,naive_smape" : "horizon,smape") << '\n';
    for (std::size_t i = 0; i < report.horizons.size(); ++i) {
        *out << report.horizons[i] << ','
             << odefit::detail::format_double(report.smape_by_horizon[i]);
        if (opt.naive_window > 0)
            *out << ',' << odefit::detail::format_double(naive_report.smape_by_horizon[i]);
        *out << '\n';
    }
    return kExitOk;
}

// -------------------------------------------------------------- experiment

struct ExperimentOptions {
    std::string preset;
    std::string config_path;
    std::string out_dir = ".";
    // optional overrides; negative/zero means "not set"
    int seeds = 0;
    long length = 0;
    int degree = 0;
    std::string orders_text;
    int max_horizon = 0;
    std::int64_t seed = -1;
    int observed_channel = -1;
};

void apply_config_file(odefit::ExperimentConfig<double>& config, const std::string& path,
                       std::string& preset_name) {
    auto in = odefit::detail::open_input(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                            ": expected key=value");
            continue;
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "preset") {
            preset_name = value;
            config = odefit::experiment_preset<double>(value);
        } else if (key == "seeds") {
            config.n_seeds = static_cast<int>(odefit::detail::parse_double(value));
        } else if (key == "length") {
            config.series_length = static_cast<Index>(odefit::detail::parse_double(value));
        } else if (key == "dt") {
            config.dt = odefit::detail::parse_double(value);
        } else if (key == "degree") {
            config.max_degree = static_cast<int>(odefit::detail::parse_double(value));
        } else if (key == "orders") {
            config.target_orders.clear();
            for (double v : parse_number_list(value))
                config.target_orders.push_back(static_cast<int>(v));
        } else if (key == "max_horizon") {
            config.horizons = dense_horizons(static_cast<int>(odefit::detail::parse_double(value)));
        } else if (key == "seed") {
            config.seed = static_cast<std::uint64_t>(odefit::detail::parse_double(value));
        } else if (key == "observed_channel") {
            config.observed_channel = static_cast<int>(odefit::detail::parse_double(value));
        } else if (key == "n_lambdas") {
            config.lasso.n_lambdas = static_cast<int>(odefit::detail::parse_double(value));
        } else if (key == "lambda_min_ratio") {
            config.lasso.lambda_min_ratio = odefit::detail::parse_double(value);
        } else if (key == "max_iter") {
            config.lasso.max_iter = static_cast<int>(odefit::detail::parse_double(value));
        } else if (key == "tol") {
            config.lasso.tol = odefit::detail::parse_double(value);
        } else if (key == "cv_folds") {
            config.lasso.cv_folds = static_cast<int>(odefit::detail::parse_double(value));
        } else {
            throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                        ": unknown key '" + key + "'");
        }
    }
}

int run_experiment_cmd(const ExperimentOptions& opt) {
    std::string preset_name = opt.preset;
    odefit::ExperimentConfig<double> config;
    if (!opt.preset.empty()) config = odefit::experiment_preset<double>(opt.preset);
    if (!opt.config_path.empty()) apply_config_file(config, opt.config_path, preset_name);
    if (preset_name.empty())
        throw std::invalid_argument("give --preset or a config file with a preset= line");

    if (opt.seeds > 0) config.n_seeds = opt.seeds;
    if (opt.length > 0) config.series_length = opt.length;
    if (opt.degree > 0) config.max_degree = opt.degree;
    if (!opt.orders_text.empty()) {
        config.target_orders.clear();
        for (double v : parse_number_list(opt.orders_text))
            config.target_orders.push_back(static_cast<int>(v));
    }
    if (opt.max_horizon > 0) config.horizons = dense_horizons(opt.max_horizon);
    if (opt.seed >= 0) config.seed = static_cast<std::uint64_t>(opt.seed);
    if (opt.observed_channel >= 0) config.observed_channel = opt.observed_channel;

    std::filesystem::create_directories(opt.out_dir);

    std::cout << "running experiment '" << preset_name << "' (" << config.n_seeds
              << " seeds, " << config.series_length << " samples, dt=" << config.dt << ")\n";
    const auto result = odefit::run_experiment(config);

    const auto stem = (std::filesystem::path(opt.out_dir) / preset_name).string();
    odefit::write_experiment_json(stem + ".json", result);
    for (const auto& group : result.by_order) {
        if (config.mode == odefit::ExperimentMode::FullRecovery) {
            std::cout << "  target order " << group.target_order
                      << ": mean coefficient MSE = " << group.mean_coefficient_mse
                      << ", mean fit time = " << group.mean_fit_time << " s\n";
            continue;
        }
        odefit::write_experiment_csv(
            stem + ".order" + std::to_string(group.target_order) + ".csv", group,
            config.horizons);
        const auto& curve = group.mean_smape_by_horizon;
        std::cout << "  target order " << group.target_order << ": mean SMAPE at h="
                  << config.horizons.back() << " is " << curve[curve.size() - 1]
                  << ", mean fit time = " << group.mean_fit_time << " s\n";
    }
    std::cout << "results written under " << opt.out_dir << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse recovery of ODEs from partially observed time series"};
    app.require_subcommand(1);

    SimulateOptions sim;
    auto* simulate = app.add_subcommand("simulate", "Integrate a benchmark system to CSV");
    simulate->add_option("system", sim.system, "oscillator | rossler | lorenz")->required();
    simulate->add_option("--a", sim.a, "oscillator/rossler coefficient a");
    simulate->add_option("--b", sim.b, "oscillator/rossler coefficient b");
    simulate->add_option("--c", sim.c, "oscillator/rossler coefficient c");
    simulate->add_option("--d", sim.d, "oscillator coefficient d");
    simulate->add_option("--sigma", sim.sigma, "lorenz sigma");
    simulate->add_option("--rho", sim.rho, "lorenz rho");
    simulate->add_option("--beta", sim.beta, "lorenz beta");
    simulate->add_option("--dt", sim.dt, "step size")->check(CLI::PositiveNumber);
    simulate->add_option("--steps", sim.steps, "number of RK4 steps (writes steps+1 rows)")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--t0", sim.t0, "initial time");
    auto* x0_opt = simulate->add_option("--x0", sim.x0_text, "comma-separated initial state");
    simulate->add_option("--seed", sim.seed, "draw the initial state from N(0,1) with this seed")
        ->excludes(x0_opt);
    simulate->add_option("-o,--output", sim.output, "output CSV path")->required();

    FitOptions fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit a sparse ODE model to a CSV series");
    fit_cmd->add_option("-i,--input", fit.input, "input time-series CSV")->required();
    fit_cmd->add_option("--channel", fit.channel, "observed channel name");
    fit_cmd->add_flag("--all-channels", fit.all_channels,
                      "fit every channel's first derivative over all channels");
    fit_cmd->add_option("--target-order", fit.target_order, "derivative order to regress")
        ->check(CLI::Range(1, odefit::kMaxDerivativeOrder));
    fit_cmd->add_option("--degree", fit.degree, "max total degree of dictionary monomials")
        ->check(CLI::PositiveNumber);
    fit_cmd->add_option("--n-lambdas", fit.lasso.n_lambdas, "penalty grid size");
    fit_cmd->add_option("--lambda-min-ratio", fit.lasso.lambda_min_ratio,
                        "smallest penalty relative to lambda_max");
    fit_cmd->add_option("--max-iter", fit.lasso.max_iter, "coordinate-descent sweep limit");
    fit_cmd->add_option("--tol", fit.lasso.tol, "convergence tolerance");
    fit_cmd->add_option("--cv-folds", fit.lasso.cv_folds, "cross-validation folds");
    fit_cmd->add_option("-o,--output", fit.output, "output model JSON path")->required();

    ForecastOptions fc;
    auto* fc_cmd = app.add_subcommand("forecast", "Integrate a fitted model forward");
    fc_cmd->add_option("-m,--model", fc.model_path, "model JSON from `fit`")->required();
    fc_cmd->add_option("-i,--input", fc.input, "series CSV supplying initial conditions")
        ->required();
    fc_cmd->add_option("--channel", fc.channel, "observed channel name");
    fc_cmd->add_option("--max-horizon", fc.max_horizon, "forecast horizons 1..H")
        ->check(CLI::PositiveNumber);
    fc_cmd->add_flag("--holdout", fc.holdout,
                     "hold out the last H samples as truth and score the forecast");
    fc_cmd->add_option("-o,--output", fc.output, "output report CSV")->required();

    EvaluateOptions ev;
    auto* ev_cmd = app.add_subcommand("evaluate", "Score a forecast report against a truth series");
    ev_cmd->add_option("-f,--forecast", ev.forecast_path, "forecast report CSV")->required();
    ev_cmd->add_option("-t,--truth", ev.truth_path, "truth series CSV")->required();
    ev_cmd->add_option("--channel", ev.channel, "truth channel name");
    ev_cmd->add_option("-o,--output", ev.output, "write the SMAPE table here (default stdout)");
    ev_cmd->add_option("--naive-window", ev.naive_window,
                       "add a trailing-mean baseline column using this window");

    ExperimentOptions ex;
    auto* ex_cmd = app.add_subcommand("experiment", "Run a multi-seed benchmark protocol");
    ex_cmd->add_option("--preset", ex.preset, "one of: oscillator-x, rossler-y, rossler-x, "
                                              "lorenz-x, lorenz-full");
    ex_cmd->add_option("--config", ex.config_path, "key=value overrides file");
    ex_cmd->add_option("-o,--out-dir", ex.out_dir, "output directory");
    ex_cmd->add_option("--seeds", ex.seeds, "number of random initial conditions");
    ex_cmd->add_option("--length", ex.length, "samples per simulated series");
    ex_cmd->add_option("--degree", ex.degree, "dictionary degree override");
    ex_cmd->add_option("--orders", ex.orders_text, "comma-separated target orders");
    ex_cmd->add_option("--max-horizon", ex.max_horizon, "forecast horizons 1..H");
    ex_cmd->add_option("--seed", ex.seed, "master seed");
    ex_cmd->add_option("--observed-channel", ex.observed_channel, "observed channel index");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (simulate->parsed()) return run_simulate(sim);
        if (fit_cmd->parsed()) return run_fit(fit);
        if (fc_cmd->parsed()) return run_forecast(fc);
        if (ev_cmd->parsed()) return run_evaluate(ev);
        if (ex_cmd->parsed()) return run_experiment_cmd(ex);
    } catch (const odefit::IntegrationDivergedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitUsage;
}
