#include "kinn/config.hpp"
#include "kinn/errors.hpp"
#include "kinn/experiments.hpp"
#include "kinn/kinn.hpp"
#include "kinn/svg.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace kinn;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Run configuration file");
    cmd->add_option("--set", args.overrides,
                    "Override a config key, e.g. --set network.epochs=100");
    cmd->add_option("--out-dir", args.out_dir, "Output directory");
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + dir);
}

// Wall-clock details stay in this sidecar log so result files remain
// byte-reproducible.
void log_invocation(const std::string& out_dir, int argc, char** argv) {
    std::ofstream log(out_dir + "/run.log", std::ios::app);
    if (!log) return;
    const auto now = std::chrono::system_clock::now();
    log << format_iso8601(std::chrono::duration_cast<std::chrono::seconds>(
                              now.time_since_epoch())
                              .count());
    for (int i = 0; i < argc; ++i) log << ' ' << argv[i];
    log << '\n';
}

struct PipelineRanges {
    TimeSeries series; // working series (original units)
    std::size_t train_end = 0;
    std::size_t val_end = 0;
    ScalerParams scaler;
};

PipelineRanges prepare_pipeline(const RunConfig& config) {
    PipelineRanges pr;
    pr.series = config.load_dataset();
    const std::size_t n = pr.series.size();
    const auto n_train = static_cast<std::size_t>(
        std::floor(config.split.train_fraction * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(
        std::floor(config.split.val_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n)
        throw ConfigError("series too short for the requested split");
    pr.train_end = n_train;
    pr.val_end = n_train + n_val;
    TimeSeries train_part;
    train_part.start_time = pr.series.start_time;
    train_part.interval = pr.series.interval;
    train_part.values.assign(pr.series.values.begin(),
                             pr.series.values.begin() +
                                 static_cast<std::ptrdiff_t>(n_train));
    pr.scaler = fit_scaler(train_part);
    return pr;
}

void write_train_report(const TrainReport& report, const std::string& path) {
    nlohmann::json j = {{"train_loss", report.train_loss},
                        {"val_loss", report.val_loss},
                        {"best_epoch", report.best_epoch},
                        {"best_val_loss", report.best_val_loss}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_synth(const CommonArgs& args) {
    const RunConfig config = RunConfig::load(args.config_path, args.overrides);
    ensure_dir(args.out_dir);
    const TimeSeries series = generate_synthetic(config.synthetic);
    const std::string path = args.out_dir + "/dataset.csv";
    save_csv(series, path);

    double sum = 0, lo = series.values[0], hi = series.values[0];
    for (double v : series.values) {
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double mean = sum / static_cast<double>(series.size());
    double ss = 0;
    for (double v : series.values) ss += (v - mean) * (v - mean);
    std::printf("wrote %s: n=%zu mean=%.4f std=%.4f min=%.4f max=%.4f\n",
                path.c_str(), series.size(),
                mean, std::sqrt(ss / static_cast<double>(series.size())), lo, hi);
    return 0;
}

int cmd_fit_expert(const CommonArgs& args) {
    const RunConfig config = RunConfig::load(args.config_path, args.overrides);
    if (config.expert_kind != "sarima")
        throw ConfigError("fit-expert requires expert.kind = sarima");
    ensure_dir(args.out_dir);
    const PipelineRanges pr = prepare_pipeline(config);
    TimeSeries train_part;
    train_part.start_time = pr.series.start_time;
    train_part.interval = pr.series.interval;
    train_part.values.assign(pr.series.values.begin(),
                             pr.series.values.begin() +
                                 static_cast<std::ptrdiff_t>(pr.train_end));

    const SarimaModel model =
        fit_sarima(train_part, config.sarima, config.sarima_fit);
    const std::string path = args.out_dir + "/expert.json";
    save_sarima(model, path);
    std::printf("wrote %s: css=%.6f iterations=%zu converged=%s\n", path.c_str(),
                model.fit.css, model.fit.iterations,
                model.fit.converged ? "true" : "false");
    if (!model.fit.converged)
        std::fprintf(stderr,
                     "warning: optimizer hit the iteration limit; "
                     "coefficients are best-so-far\n");
    return 0;
}

int cmd_train(const CommonArgs& args, const std::string& model_kind) {
    const RunConfig config = RunConfig::load(args.config_path, args.overrides);
    ensure_dir(args.out_dir);
    const PipelineRanges pr = prepare_pipeline(config);
    const std::size_t p = config.window;
    const TimeSeries scaled = transform(pr.series, pr.scaler);

    if (model_kind == "nn") {
        NetworkConfig net = config.network_config();
        net.input_channels = 1;
        const auto train_ds = windows_for_targets(scaled, p, pr.train_end, p);
        const auto val_ds =
            windows_for_targets(scaled, pr.train_end, pr.val_end, p);
        TrainResult trained =
            train(net, train_ds, val_ds, config.train_options());
        save_checkpoint(trained.params, args.out_dir + "/nn.ckpt");
        write_train_report(trained.report, args.out_dir + "/nn_report.json");
        std::printf("nn: best_epoch=%d best_val_loss=%.8f (scaled units)\n",
                    trained.report.best_epoch, trained.report.best_val_loss);
        return 0;
    }

    // kinn: needs a fitted expert.
    std::shared_ptr<const ExpertModel> expert;
    if (config.expert_kind == "sarima") {
        const std::string expert_path = args.out_dir + "/expert.json";
        if (!fs::exists(expert_path))
            throw ConfigError("missing fitted expert " + expert_path +
                              "; run fit-expert first");
        expert = std::make_shared<SarimaExpert>(load_sarima(expert_path));
    } else {
        expert = std::make_shared<SeasonalNaiveExpert>(
            static_cast<std::size_t>(config.sarima.season));
    }

    const std::size_t first_target = std::max(p, expert->min_history());
    if (first_target + 1 >= pr.train_end)
        throw ConfigError("train split too short for the expert's history");
    KinnTrainResult trained = kinn_train(
        config.network_config(), config.train_options(), expert, pr.series,
        {first_target, pr.train_end}, {pr.train_end, pr.val_end}, pr.scaler, p,
        config.conditioning_mode());
    save_kinn_bundle(trained.model, args.out_dir + "/kinn_bundle");
    write_train_report(trained.report, args.out_dir + "/kinn_report.json");
    std::printf("kinn: best_epoch=%d best_val_loss=%.8f (scaled units)\n",
                trained.report.best_epoch, trained.report.best_val_loss);
    return 0;
}

void render_row_plots(const ExperimentResult& r, const std::string& dir) {
    const std::size_t show = std::min<std::size_t>(200, r.truth.size());
    auto head = [&](const std::vector<double>& v) {
        return std::vector<double>(v.begin(),
                                   v.begin() + static_cast<std::ptrdiff_t>(show));
    };
    write_svg_chart(dir + "/predictions-" + r.spec.key + ".svg",
                    "Test-set predictions (" + r.spec.description + ")",
                    {{"observed", "#222222", head(r.truth)},
                     {"nn", "#1f77b4", head(r.pred_nn)},
                     {"expert", "#2ca02c", head(r.pred_expert)},
                     {"kinn", "#d62728", head(r.pred_kinn)}},
                    r.first_test_target, "step", "value");
    write_svg_chart(dir + "/errors-" + r.spec.key + ".svg",
                    "Step-wise absolute error (" + r.spec.description + ")",
                    {{"nn", "#1f77b4", head(r.err_nn)},
                     {"expert", "#2ca02c", head(r.err_expert)},
                     {"kinn", "#d62728", head(r.err_kinn)}},
                    r.first_test_target, "step", "absolute error");
}

int cmd_experiment(const CommonArgs& args, int id, bool all, std::size_t jobs) {
    const RunConfig config = RunConfig::load(args.config_path, args.overrides);
    if (!all && (id < 1 || id > 5))
        throw ConfigError("experiment id must be 1..5 (or use --all)");
    ensure_dir(args.out_dir);

    const TimeSeries dataset = config.load_dataset();
    const auto specs = all ? standard_experiments() : experiments_for_id(id);
    const auto results =
        run_experiments(specs, dataset, config.experiment_configs(), jobs);

    write_results_csv(results, args.out_dir + "/results.csv");
    write_results_json(results, args.out_dir + "/results.json");
    bool any_failed = false;
    for (const auto& r : results) {
        if (r.failed) {
            any_failed = true;
            std::fprintf(stderr, "experiment %s failed: %s\n",
                         r.spec.key.c_str(), r.error.c_str());
            continue;
        }
        write_predictions_csv(r, args.out_dir + "/predictions-" + r.spec.key +
                                     ".csv");
        render_row_plots(r, args.out_dir);
        std::printf("%-10s mse_nn=%-10.4f mse_expert=%-10.4f mse_kinn=%-10.4f\n",
                    r.spec.key.c_str(), r.mse_nn, r.mse_expert, r.mse_kinn);
    }
    return any_failed ? 2 : 0;
}

int cmd_report(const std::string& results_dir) {
    const std::string path = results_dir + "/results.json";
    if (!fs::exists(path))
        throw IoError("no results found in " + results_dir);
    const auto results = load_results_json(path);
    if (results.empty()) throw IoError("results file is empty");

    std::printf("%-10s %-55s %6s %12s %12s %12s\n", "key", "description", "pct",
                "mse_dnn", "mse_expert", "mse_kinn");
    for (const auto& r : results) {
        if (r.failed) {
            std::printf("%-10s %-55s failed: %s\n", r.spec.key.c_str(),
                        r.spec.description.c_str(), r.error.c_str());
            continue;
        }
        std::printf("%-10s %-55s %6g %12.4f %12.4f %12.4f\n", r.spec.key.c_str(),
                    r.spec.description.c_str(), r.spec.data_fraction * 100,
                    r.mse_nn, r.mse_expert, r.mse_kinn);
        render_row_plots(r, results_dir);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Residual fusion of a seasonal expert model and an LSTM "
                 "forecaster"};
    app.require_subcommand(1);

    CommonArgs synth_args, fit_args, train_args, exp_args;
    std::string train_model = "nn";
    int exp_id = 0;
    bool exp_all = false;
    std::size_t exp_jobs = 1;
    std::string report_dir;

    add_common(app.add_subcommand("synth", "Generate the synthetic dataset CSV"),
               synth_args);
    add_common(app.add_subcommand("fit-expert",
                                  "Fit the seasonal ARIMA expert on the train "
                                  "split"),
               fit_args);
    auto* train_cmd =
        app.add_subcommand("train", "Train the plain network or the residual "
                                    "fusion model");
    add_common(train_cmd, train_args);
    train_cmd->add_option("--model", train_model, "nn or kinn")
        ->check(CLI::IsMember({"nn", "kinn"}));
    auto* exp_cmd = app.add_subcommand(
        "experiment", "Run the benchmark experiment rows end to end");
    add_common(exp_cmd, exp_args);
    exp_cmd->add_option("--id", exp_id, "Experiment id (1..5)");
    exp_cmd->add_flag("--all", exp_all, "Run every experiment row");
    exp_cmd->add_option("--jobs", exp_jobs, "Rows to run in parallel");
    auto* report_cmd = app.add_subcommand(
        "report", "Render summary table and SVG plots from saved results");
    report_cmd->add_option("--results-dir", report_dir, "Directory with results.json")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand("synth")) {
            log_invocation(synth_args.out_dir, argc, argv);
            return cmd_synth(synth_args);
        }
        if (app.got_subcommand("fit-expert")) {
            log_invocation(fit_args.out_dir, argc, argv);
            return cmd_fit_expert(fit_args);
        }
        if (app.got_subcommand("train")) {
            log_invocation(train_args.out_dir, argc, argv);
            return cmd_train(train_args, train_model);
        }
        if (app.got_subcommand("experiment")) {
            if (!exp_all && exp_id == 0)
                throw ConfigError("experiment needs --id N or --all");
            log_invocation(exp_args.out_dir, argc, argv);
            return cmd_experiment(exp_args, exp_id, exp_all, exp_jobs);
        }
        if (app.got_subcommand("report")) return cmd_report(report_dir);
        return 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const ComputeError& e) {
        std::fprintf(stderr, "compute error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
