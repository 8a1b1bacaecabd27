#include "kinn/experiments.hpp"
#include "kinn/errors.hpp"
#include "kinn/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

namespace kinn {

// ---------------------------------------------------------------------------
// Synthetic series
// ---------------------------------------------------------------------------

TimeSeries generate_synthetic(const SyntheticSpec& spec) {
    if (spec.length == 0) throw ConfigError("synthetic length must be positive");
    if (spec.season == 0) throw ConfigError("synthetic season must be positive");
    if (std::abs(spec.ar_coefficient) >= 1.0)
        throw ConfigError("synthetic AR coefficient must lie in (-1,1)");

    Rng rng = Rng::derive(spec.seed, 0x73796e74ULL); // "synt"
    const std::size_t burn = 100;
    double u = 0.0;
    for (std::size_t t = 0; t < burn; ++t)
        u = spec.ar_coefficient * u + spec.noise_std * rng.next_gaussian();

    TimeSeries out;
    out.start_time = 1451606400; // 2016-01-01T00:00:00, 30-minute buckets
    out.interval = 1800;
    out.values.resize(spec.length);
    const double two_pi = 2.0 * M_PI;
    for (std::size_t t = 0; t < spec.length; ++t) {
        const double phase =
            std::sin(two_pi * static_cast<double>(t % spec.season) /
                     static_cast<double>(spec.season));
        const double base = spec.amplitude * std::max(0.0, phase);
        u = spec.ar_coefficient * u + spec.noise_std * rng.next_gaussian();
        const double level =
            spec.amplitude > 0.0
                ? 1.0 + spec.peak_variance_factor * base / spec.amplitude
                : 1.0;
        out.values[t] = std::max(0.0, base + u * level);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Experiment grid
// ---------------------------------------------------------------------------

std::string to_string(ExpertKind kind) {
    switch (kind) {
        case ExpertKind::Fitted: return "fitted";
        case ExpertKind::Noisy: return "noisy";
        case ExpertKind::Zero: return "zero";
        case ExpertKind::Lagged: return "lagged";
    }
    return "?";
}

std::vector<ExperimentSpec> standard_experiments() {
    // Anchor MSE triples are the values the original Richards Ave traffic
    // evaluation reported for each row; they document the expected direction.
    return {
        {1, "1", "Full training set and accurate expert", 1.0,
         ExpertKind::Fitted, 5.90, 1.24, 0.74},
        {2, "2-50", "Reduced training set (50%) and accurate expert", 0.5,
         ExpertKind::Fitted, 6.36, 1.52, 0.89},
        {2, "2-10", "Reduced training set (10%) and accurate expert", 0.1,
         ExpertKind::Fitted, 6.68, 2.67, 1.53},
        {3, "3", "Full training set and noisy expert", 1.0, ExpertKind::Noisy,
         5.90, 7.81, 3.09},
        {4, "4", "Reduced training set and noisy expert", 0.1, ExpertKind::Noisy,
         6.68, 7.81, 3.73},
        {5, "5-zero", "Full training set and zero expert pred.", 1.0,
         ExpertKind::Zero, 5.90, 621.00, 5.92},
        {5, "5-lagged", "Full training set and delayed expert pred.", 1.0,
         ExpertKind::Lagged, 5.90, 9.04, 5.91},
    };
}

std::vector<ExperimentSpec> experiments_for_id(int id) {
    std::vector<ExperimentSpec> out;
    for (const auto& spec : standard_experiments())
        if (spec.id == id) out.push_back(spec);
    if (out.empty())
        throw ConfigError("no experiment with id " + std::to_string(id));
    return out;
}

// ---------------------------------------------------------------------------
// Step-wise diagnostics
// ---------------------------------------------------------------------------

StepwiseStats stepwise_analysis(std::span<const double> kinn_errors,
                                std::span<const double> expert_errors,
                                std::span<const double> nn_errors,
                                double near_tie_threshold) {
    const std::size_t n = kinn_errors.size();
    if (expert_errors.size() != n || nn_errors.size() != n || n == 0)
        throw ConfigError("stepwise analysis needs aligned non-empty series");
    std::size_t exceed_e = 0, exceed_n = 0, tie_e = 0, tie_n = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (kinn_errors[i] > expert_errors[i]) ++exceed_e;
        if (kinn_errors[i] > nn_errors[i]) ++exceed_n;
        if (std::abs(kinn_errors[i] - expert_errors[i]) < near_tie_threshold)
            ++tie_e;
        if (std::abs(kinn_errors[i] - nn_errors[i]) < near_tie_threshold)
            ++tie_n;
    }
    StepwiseStats stats;
    const double dn = static_cast<double>(n);
    stats.exceed_vs_expert = static_cast<double>(exceed_e) / dn;
    stats.exceed_vs_nn = static_cast<double>(exceed_n) / dn;
    stats.near_tie_vs_expert = static_cast<double>(tie_e) / dn;
    stats.near_tie_vs_nn = static_cast<double>(tie_n) / dn;
    stats.threshold = near_tie_threshold;
    return stats;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

namespace {

TimeSeries slice_series(const TimeSeries& ts, std::size_t begin, std::size_t end) {
    TimeSeries out;
    out.start_time = ts.time_at(begin);
    out.interval = ts.interval;
    out.values.assign(ts.values.begin() + static_cast<std::ptrdiff_t>(begin),
                      ts.values.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

std::shared_ptr<const ExpertModel> build_expert(const ExperimentSpec& spec,
                                                const TimeSeries& train_part,
                                                const ExperimentConfigs& cfg) {
    switch (spec.expert_kind) {
        case ExpertKind::Zero:
            return std::make_shared<ZeroExpert>();
        case ExpertKind::Lagged:
            return std::make_shared<LaggedExpert>(1);
        case ExpertKind::Fitted:
        case ExpertKind::Noisy: {
            std::shared_ptr<const ExpertModel> fitted;
            if (cfg.use_seasonal_naive) {
                fitted = std::make_shared<SeasonalNaiveExpert>(
                    static_cast<std::size_t>(cfg.sarima.season));
            } else {
                fitted = std::make_shared<SarimaExpert>(
                    fit_sarima(train_part, cfg.sarima, cfg.sarima_fit));
            }
            if (spec.expert_kind == ExpertKind::Fitted) return fitted;
            // Noise amplitude: one standard deviation of the train split in
            // original units.
            const double amplitude = fit_scaler(train_part).std;
            return std::make_shared<NoisyExpert>(fitted, amplitude,
                                                 cfg.noise_seed,
                                                 cfg.noise_distribution);
        }
    }
    throw ConfigError("unknown expert kind");
}

std::vector<double> absolute_errors(const std::vector<double>& truth,
                                    const std::vector<double>& preds) {
    std::vector<double> err(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i)
        err[i] = std::abs(preds[i] - truth[i]);
    return err;
}

} // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec,
                                const TimeSeries& aggregated,
                                const ExperimentConfigs& configs) {
    if (spec.data_fraction <= 0.0 || spec.data_fraction > 1.0)
        throw ConfigError("data fraction must lie in (0,1]");
    configs.split.validate();

    const std::size_t n = aggregated.size();
    const auto n_train = static_cast<std::size_t>(std::floor(
        configs.split.train_fraction * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(
        std::floor(configs.split.val_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n)
        throw ConfigError("series too short for the requested split");

    // Keep the most recent fraction of the train split; everything before
    // it is treated as unobserved for this run. Validation and test indices
    // are unaffected, so the test set is identical across fractions.
    const auto kept = static_cast<std::size_t>(std::floor(
        spec.data_fraction * static_cast<double>(n_train)));
    if (kept < 2) throw ConfigError("data fraction leaves an empty train split");
    const std::size_t start = n_train - kept;

    const TimeSeries working = slice_series(aggregated, start, n);
    const std::size_t train_end = n_train - start;
    const std::size_t val_end = train_end + n_val;
    const TimeSeries train_part = slice_series(working, 0, train_end);

    const auto expert = build_expert(spec, train_part, configs);
    const ScalerParams scaler = fit_scaler(train_part);

    const std::size_t p = configs.window;
    const std::size_t first_train_target = std::max(p, expert->min_history());
    if (first_train_target + 1 >= train_end)
        throw ConfigError("train split too short for the expert's history needs");

    const RangeSpec train_targets{first_train_target, train_end};
    const RangeSpec val_targets{train_end, val_end};
    const RangeSpec test_targets{val_end, working.size()};

    // Plain network: scaled windows, scaled observations as targets.
    const TimeSeries scaled = transform(working, scaler);
    NetworkConfig nn_config = configs.network;
    nn_config.input_channels = 1;
    const WindowedDataset nn_train =
        windows_for_targets(scaled, train_targets.begin, train_targets.end, p);
    const WindowedDataset nn_val =
        windows_for_targets(scaled, val_targets.begin, val_targets.end, p);
    TrainResult nn = train(nn_config, nn_train, nn_val, configs.train_options);

    // Residual network conditioned on the expert.
    KinnTrainResult kinn =
        kinn_train(configs.network, configs.train_options, expert, working,
                   train_targets, val_targets, scaler, p, configs.mode);

    // Test-set evaluation, everything in original units.
    ExperimentResult result;
    result.spec = spec;
    result.first_test_target = start + test_targets.begin;
    result.truth.assign(
        working.values.begin() + static_cast<std::ptrdiff_t>(test_targets.begin),
        working.values.end());

    result.pred_expert =
        rolling_forecast(*expert, working, test_targets.begin, test_targets.end);

    const WindowedDataset nn_test =
        windows_for_targets(scaled, test_targets.begin, test_targets.end, p);
    result.pred_nn = forward(nn.params, nn_test);
    for (double& v : result.pred_nn) v = inverse_transform_value(v, scaler);

    result.pred_kinn = kinn_predict(kinn.model, working, test_targets.begin,
                                    test_targets.end);

    result.mse_nn = mse_loss(result.pred_nn, result.truth);
    result.mse_expert = mse_loss(result.pred_expert, result.truth);
    result.mse_kinn = mse_loss(result.pred_kinn, result.truth);

    result.err_nn = absolute_errors(result.truth, result.pred_nn);
    result.err_expert = absolute_errors(result.truth, result.pred_expert);
    result.err_kinn = absolute_errors(result.truth, result.pred_kinn);
    result.stepwise = stepwise_analysis(result.err_kinn, result.err_expert,
                                        result.err_nn,
                                        configs.near_tie_threshold);

    result.epochs_to_best_nn = nn.report.best_epoch + 1;
    result.epochs_to_best_kinn = kinn.report.best_epoch + 1;
    result.nn_report = std::move(nn.report);
    result.kinn_report = std::move(kinn.report);
    return result;
}

std::vector<ExperimentResult> run_experiments(
    const std::vector<ExperimentSpec>& specs, const TimeSeries& aggregated,
    const ExperimentConfigs& configs, std::size_t jobs) {
    std::vector<ExperimentResult> results(specs.size());
    if (jobs == 0) jobs = 1;

    auto run_one = [&](std::size_t i) {
        try {
            results[i] = run_experiment(specs[i], aggregated, configs);
        } catch (const std::exception& e) {
            results[i].spec = specs[i];
            results[i].failed = true;
            results[i].error = e.what();
        }
    };

    if (jobs == 1 || specs.size() <= 1) {
        for (std::size_t i = 0; i < specs.size(); ++i) run_one(i);
        return results;
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const std::size_t count = std::min(jobs, specs.size());
    workers.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < specs.size();
                 i = next.fetch_add(1))
                run_one(i);
        });
    }
    for (auto& t : workers) t.join();
    return results;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

void write_results_csv(const std::vector<ExperimentResult>& results,
                       const std::string& path) {
    if (results.empty()) throw ConfigError("no results to write");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "experiment,description,training_data_pct,mse_dnn,mse_expert,mse_kinn\n";
    char buf[64];
    for (const auto& r : results) {
        out << r.spec.id << ",\"" << r.spec.description << "\",";
        std::snprintf(buf, sizeof(buf), "%g", r.spec.data_fraction * 100.0);
        out << buf << ',';
        if (r.failed) {
            out << "failed,failed,failed\n";
            continue;
        }
        std::snprintf(buf, sizeof(buf), "%.17g", r.mse_nn);
        out << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", r.mse_expert);
        out << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", r.mse_kinn);
        out << buf << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

namespace {

nlohmann::json report_to_json(const TrainReport& report) {
    return {{"train_loss", report.train_loss},
            {"val_loss", report.val_loss},
            {"best_epoch", report.best_epoch},
            {"best_val_loss", report.best_val_loss}};
}

TrainReport report_from_json(const nlohmann::json& j) {
    TrainReport r;
    r.train_loss = j.at("train_loss").get<std::vector<double>>();
    r.val_loss = j.at("val_loss").get<std::vector<double>>();
    r.best_epoch = j.at("best_epoch").get<int>();
    r.best_val_loss = j.at("best_val_loss").get<double>();
    return r;
}

} // namespace

void write_results_json(const std::vector<ExperimentResult>& results,
                        const std::string& path) {
    if (results.empty()) throw ConfigError("no results to write");
    nlohmann::json doc;
    doc["schema_version"] = 1;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : results) {
        nlohmann::json row;
        row["id"] = r.spec.id;
        row["key"] = r.spec.key;
        row["description"] = r.spec.description;
        row["data_fraction"] = r.spec.data_fraction;
        row["expert_kind"] = to_string(r.spec.expert_kind);
        row["anchor_mse"] = {{"nn", r.spec.anchor_nn},
                             {"expert", r.spec.anchor_expert},
                             {"kinn", r.spec.anchor_kinn}};
        row["failed"] = r.failed;
        if (r.failed) {
            row["error"] = r.error;
            rows.push_back(std::move(row));
            continue;
        }
        row["mse"] = {{"nn", r.mse_nn},
                      {"expert", r.mse_expert},
                      {"kinn", r.mse_kinn}};
        row["first_test_target"] = r.first_test_target;
        row["stepwise"] = {{"exceed_vs_expert", r.stepwise.exceed_vs_expert},
                           {"exceed_vs_nn", r.stepwise.exceed_vs_nn},
                           {"near_tie_vs_expert", r.stepwise.near_tie_vs_expert},
                           {"near_tie_vs_nn", r.stepwise.near_tie_vs_nn},
                           {"threshold", r.stepwise.threshold}};
        row["epochs_to_best"] = {{"nn", r.epochs_to_best_nn},
                                 {"kinn", r.epochs_to_best_kinn}};
        row["errors"] = {{"nn", r.err_nn},
                         {"expert", r.err_expert},
                         {"kinn", r.err_kinn}};
        row["truth"] = r.truth;
        row["predictions"] = {{"nn", r.pred_nn},
                              {"expert", r.pred_expert},
                              {"kinn", r.pred_kinn}};
        row["train_report"] = {{"nn", report_to_json(r.nn_report)},
                               {"kinn", report_to_json(r.kinn_report)}};
        rows.push_back(std::move(row));
    }
    doc["rows"] = std::move(rows);

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << doc.dump(1) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

std::vector<ExperimentResult> load_results_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
        if (doc.at("schema_version").get<int>() != 1)
            throw IoError("unsupported results schema in " + path);
        std::vector<ExperimentResult> results;
        for (const auto& row : doc.at("rows")) {
            ExperimentResult r;
            r.spec.id = row.at("id").get<int>();
            r.spec.key = row.at("key").get<std::string>();
            r.spec.description = row.at("description").get<std::string>();
            r.spec.data_fraction = row.at("data_fraction").get<double>();
            const auto kind = row.at("expert_kind").get<std::string>();
            if (kind == "fitted") r.spec.expert_kind = ExpertKind::Fitted;
            else if (kind == "noisy") r.spec.expert_kind = ExpertKind::Noisy;
            else if (kind == "zero") r.spec.expert_kind = ExpertKind::Zero;
            else if (kind == "lagged") r.spec.expert_kind = ExpertKind::Lagged;
            else throw IoError("unknown expert kind '" + kind + "' in " + path);
            r.spec.anchor_nn = row.at("anchor_mse").at("nn").get<double>();
            r.spec.anchor_expert = row.at("anchor_mse").at("expert").get<double>();
            r.spec.anchor_kinn = row.at("anchor_mse").at("kinn").get<double>();
            r.failed = row.at("failed").get<bool>();
            if (r.failed) {
                r.error = row.at("error").get<std::string>();
                results.push_back(std::move(r));
                continue;
            }
            r.mse_nn = row.at("mse").at("nn").get<double>();
            r.mse_expert = row.at("mse").at("expert").get<double>();
            r.mse_kinn = row.at("mse").at("kinn").get<double>();
            r.first_test_target = row.at("first_test_target").get<std::size_t>();
            r.stepwise.exceed_vs_expert =
                row.at("stepwise").at("exceed_vs_expert").get<double>();
            r.stepwise.exceed_vs_nn =
                row.at("stepwise").at("exceed_vs_nn").get<double>();
            r.stepwise.near_tie_vs_expert =
                row.at("stepwise").at("near_tie_vs_expert").get<double>();
            r.stepwise.near_tie_vs_nn =
                row.at("stepwise").at("near_tie_vs_nn").get<double>();
            r.stepwise.threshold = row.at("stepwise").at("threshold").get<double>();
            r.epochs_to_best_nn = row.at("epochs_to_best").at("nn").get<int>();
            r.epochs_to_best_kinn = row.at("epochs_to_best").at("kinn").get<int>();
            r.err_nn = row.at("errors").at("nn").get<std::vector<double>>();
            r.err_expert = row.at("errors").at("expert").get<std::vector<double>>();
            r.err_kinn = row.at("errors").at("kinn").get<std::vector<double>>();
            r.truth = row.at("truth").get<std::vector<double>>();
            r.pred_nn = row.at("predictions").at("nn").get<std::vector<double>>();
            r.pred_expert =
                row.at("predictions").at("expert").get<std::vector<double>>();
            r.pred_kinn =
                row.at("predictions").at("kinn").get<std::vector<double>>();
            r.nn_report = report_from_json(row.at("train_report").at("nn"));
            r.kinn_report = report_from_json(row.at("train_report").at("kinn"));
            results.push_back(std::move(r));
        }
        return results;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed results file " + path + ": " + e.what());
    }
}

void write_predictions_csv(const ExperimentResult& result,
                           const std::string& path) {
    if (result.failed) throw ConfigError("cannot export a failed result");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "t,truth,nn,expert,kinn\n";
    char buf[64];
    for (std::size_t i = 0; i < result.truth.size(); ++i) {
        out << result.first_test_target + i;
        const double cols[4] = {result.truth[i], result.pred_nn[i],
                                result.pred_expert[i], result.pred_kinn[i]};
        for (double v : cols) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

} // namespace kinn
