#include "kinn/kinn.hpp"
#include "kinn/errors.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace kinn {

std::string to_string(ConditioningMode mode) {
    return mode == ConditioningMode::StackChannel ? "stack" : "append";
}

ConditioningMode conditioning_mode_from_string(const std::string& text) {
    if (text == "stack") return ConditioningMode::StackChannel;
    if (text == "append") return ConditioningMode::AppendToSequence;
    throw ConfigError("unknown conditioning mode '" + text +
                      "' (expected stack or append)");
}

WindowedDataset windows_for_targets(const TimeSeries& series,
                                    std::size_t first_target,
                                    std::size_t last_target, std::size_t p) {
    if (first_target < p)
        throw ConfigError("first target " + std::to_string(first_target) +
                          " leaves no room for a window of size " +
                          std::to_string(p));
    if (last_target > series.size() || first_target >= last_target)
        throw ConfigError("invalid target range");
    TimeSeries slice;
    slice.start_time = series.time_at(first_target - p);
    slice.interval = series.interval;
    slice.values.assign(
        series.values.begin() + static_cast<std::ptrdiff_t>(first_target - p),
        series.values.begin() + static_cast<std::ptrdiff_t>(last_target));
    return make_windows(slice, p);
}

WindowedDataset condition_inputs(const WindowedDataset& base,
                                 const std::vector<double>& scaled_expert_preds,
                                 ConditioningMode mode) {
    if (base.layout != ChannelLayout::ValuesOnly || base.channels != 1)
        throw ConfigError("conditioning expects a plain values-only dataset");
    if (scaled_expert_preds.size() != base.rows)
        throw ConfigError("expert predictions misaligned: got " +
                          std::to_string(scaled_expert_preds.size()) +
                          " for " + std::to_string(base.rows) + " windows");

    WindowedDataset out;
    out.rows = base.rows;
    out.targets = base.targets;
    const std::size_t p = base.steps;
    if (mode == ConditioningMode::AppendToSequence) {
        out.steps = p + 1;
        out.channels = 1;
        out.layout = ChannelLayout::ValuesOnly;
        out.inputs.resize(out.rows * out.steps);
        for (std::size_t i = 0; i < out.rows; ++i) {
            for (std::size_t t = 0; t < p; ++t) out.at(i, t, 0) = base.at(i, t, 0);
            out.at(i, p, 0) = scaled_expert_preds[i];
        }
    } else {
        out.steps = p;
        out.channels = 2;
        out.layout = ChannelLayout::ValuesPlusExpert;
        out.inputs.resize(out.rows * p * 2);
        for (std::size_t i = 0; i < out.rows; ++i) {
            for (std::size_t t = 0; t < p; ++t) {
                out.at(i, t, 0) = base.at(i, t, 0);
                out.at(i, t, 1) = scaled_expert_preds[i];
            }
        }
    }
    return out;
}

std::vector<double> kinn_forward(const KinnModel& model,
                                 const WindowedDataset& conditioned,
                                 const std::vector<double>& expert_preds) {
    if (expert_preds.size() != conditioned.rows)
        throw ConfigError("expert predictions misaligned with the batch");
    auto preds = forward(model.network, conditioned);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double scaled =
            preds[i] + transform_value(expert_preds[i], model.scaler);
        preds[i] = inverse_transform_value(scaled, model.scaler);
    }
    return preds;
}

namespace {

// Scaled windows over a target range conditioned on scaled expert forecasts,
// with residual targets (scaled truth minus scaled expert prediction).
WindowedDataset conditioned_residual_dataset(const TimeSeries& scaled_series,
                                             RangeSpec targets,
                                             const std::vector<double>& preds,
                                             const ScalerParams& scaler,
                                             std::size_t window,
                                             ConditioningMode mode) {
    WindowedDataset base =
        windows_for_targets(scaled_series, targets.begin, targets.end, window);
    std::vector<double> scaled_preds(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i)
        scaled_preds[i] = transform_value(preds[i], scaler);
    WindowedDataset out = condition_inputs(base, scaled_preds, mode);
    for (std::size_t i = 0; i < out.rows; ++i)
        out.targets[i] -= scaled_preds[i];
    return out;
}

} // namespace

KinnTrainResult kinn_train(const NetworkConfig& base_config,
                           const TrainOptions& options,
                           std::shared_ptr<const ExpertModel> expert,
                           const TimeSeries& series, RangeSpec train_targets,
                           RangeSpec val_targets, const ScalerParams& scaler,
                           std::size_t window, ConditioningMode mode) {
    if (!expert) throw ConfigError("kinn_train needs a fitted expert");

    const auto train_preds =
        rolling_forecast(*expert, series, train_targets.begin, train_targets.end);
    const auto val_preds =
        rolling_forecast(*expert, series, val_targets.begin, val_targets.end);

    const TimeSeries scaled = transform(series, scaler);
    const WindowedDataset train_ds = conditioned_residual_dataset(
        scaled, train_targets, train_preds, scaler, window, mode);
    const WindowedDataset val_ds = conditioned_residual_dataset(
        scaled, val_targets, val_preds, scaler, window, mode);

    NetworkConfig config = base_config;
    config.input_channels = mode == ConditioningMode::StackChannel ? 2 : 1;

    TrainResult trained = train(config, train_ds, val_ds, options);

    KinnTrainResult out;
    out.model.network = std::move(trained.params);
    out.model.expert = std::move(expert);
    out.model.mode = mode;
    out.model.scaler = scaler;
    out.model.window = window;
    out.report = std::move(trained.report);
    return out;
}

std::vector<double> kinn_predict(const KinnModel& model, const TimeSeries& series,
                                 std::size_t first_target,
                                 std::size_t last_target) {
    const auto preds =
        rolling_forecast(*model.expert, series, first_target, last_target);
    const TimeSeries scaled = transform(series, model.scaler);
    WindowedDataset base =
        windows_for_targets(scaled, first_target, last_target, model.window);
    std::vector<double> scaled_preds(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i)
        scaled_preds[i] = transform_value(preds[i], model.scaler);
    const WindowedDataset conditioned =
        condition_inputs(base, scaled_preds, model.mode);
    return kinn_forward(model, conditioned, preds);
}

// ---------------------------------------------------------------------------
// Bundle persistence
// ---------------------------------------------------------------------------

void save_kinn_bundle(const KinnModel& model, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create bundle directory: " + dir);

    save_checkpoint(model.network, dir + "/network.ckpt");

    nlohmann::json scaler = {{"mean", model.scaler.mean},
                             {"std", model.scaler.std}};
    std::ofstream sout(dir + "/scaler.json");
    if (!sout) throw IoError("cannot write " + dir + "/scaler.json");
    sout << scaler.dump(2) << '\n';

    nlohmann::json manifest;
    manifest["format_version"] = 1;
    manifest["mode"] = to_string(model.mode);
    manifest["window"] = model.window;
    if (const auto* sarima = dynamic_cast<const SarimaExpert*>(model.expert.get())) {
        manifest["expert_kind"] = "sarima";
        save_sarima(sarima->model(), dir + "/expert.json");
    } else if (model.expert->name() == "seasonal-naive") {
        manifest["expert_kind"] = "seasonal-naive";
        manifest["expert_season"] = model.expert->min_history();
    } else {
        throw ConfigError("expert '" + model.expert->name() +
                          "' cannot be persisted in a bundle");
    }
    std::ofstream mout(dir + "/manifest.json");
    if (!mout) throw IoError("cannot write " + dir + "/manifest.json");
    mout << manifest.dump(2) << '\n';
}

KinnModel load_kinn_bundle(const std::string& dir) {
    std::ifstream min(dir + "/manifest.json");
    if (!min) throw IoError("cannot open " + dir + "/manifest.json");
    nlohmann::json manifest;
    try {
        min >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest in " + dir + ": " + e.what());
    }
    if (manifest.value("format_version", 0) != 1)
        throw IoError("unsupported bundle format version in " + dir);

    KinnModel model;
    model.mode = conditioning_mode_from_string(manifest.at("mode").get<std::string>());
    model.window = manifest.at("window").get<std::size_t>();
    model.network = load_checkpoint(dir + "/network.ckpt");

    std::ifstream sin(dir + "/scaler.json");
    if (!sin) throw IoError("cannot open " + dir + "/scaler.json");
    nlohmann::json scaler;
    try {
        sin >> scaler;
        model.scaler.mean = scaler.at("mean").get<double>();
        model.scaler.std = scaler.at("std").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed scaler in " + dir + ": " + e.what());
    }

    const auto kind = manifest.at("expert_kind").get<std::string>();
    if (kind == "sarima") {
        model.expert =
            std::make_shared<SarimaExpert>(load_sarima(dir + "/expert.json"));
    } else if (kind == "seasonal-naive") {
        model.expert = std::make_shared<SeasonalNaiveExpert>(
            manifest.at("expert_season").get<std::size_t>());
    } else {
        throw IoError("unknown expert kind '" + kind + "' in " + dir);
    }
    return model;
}

} // namespace kinn
