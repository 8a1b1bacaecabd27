#ifndef KINN_CONFIG_HPP
#define KINN_CONFIG_HPP

#include "kinn/experiments.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace kinn {

/**
 * Flat key-value run configuration. Every key has a documented default;
 * unknown keys and out-of-range values are rejected before any computation
 * starts. File syntax: one `key = value` per line, `#` comments.
 */
struct RunConfig {
    // dataset
    std::string dataset_kind = "synthetic"; // synthetic | csv
    std::string csv_path;
    std::string timestamp_column = "timestamp";
    std::string value_column = "value";
    std::string fill = "none"; // none | forward
    std::int64_t bucket_seconds = 1800;
    SyntheticSpec synthetic;

    SplitSpec split;

    // expert
    std::string expert_kind = "sarima"; // sarima | seasonal-naive
    SarimaConfig sarima;
    SarimaFitOptions sarima_fit;
    std::string noise = "uniform"; // uniform | gaussian
    std::uint64_t noise_seed = 7;

    // network
    std::vector<std::size_t> widths = {64, 64, 64};
    std::vector<Activation> activations; // empty = sigmoid,relu,relu,...
    std::size_t window = 3;
    std::size_t epochs = 600;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t network_seed = 42;

    // kinn
    std::string mode = "stack"; // stack | append

    // experiment
    double near_tie_threshold = 1.5;

    /// Parse `key = value` lines from a file, then apply validate().
    static RunConfig load(const std::string& path,
                          const std::vector<std::string>& overrides = {});

    /// Apply one "key=value" override (same keys as the file).
    void set(const std::string& key, const std::string& value);

    void validate() const;

    // Assembled views over the raw fields.
    NetworkConfig network_config() const;
    TrainOptions train_options() const;
    ExperimentConfigs experiment_configs() const;
    NoiseDistribution noise_distribution() const;
    ConditioningMode conditioning_mode() const;

    /// The aggregated working series: generated synthetic data, or the CSV
    /// loaded and mean-aggregated into buckets.
    TimeSeries load_dataset() const;
};

} // namespace kinn

#endif // KINN_CONFIG_HPP
