#ifndef KINN_EXPERIMENTS_HPP
#define KINN_EXPERIMENTS_HPP

#include "kinn/expert.hpp"
#include "kinn/kinn.hpp"
#include "kinn/network.hpp"
#include "kinn/timeseries.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace kinn {

// ---------------------------------------------------------------------------
// Synthetic benchmark series
// ---------------------------------------------------------------------------

/**
 * Desk-scale traffic-like series: a rectified sinusoid of period `season`
 * plus AR(1) noise whose amplitude grows with the seasonal level, clamped
 * at zero. Deterministic per seed.
 */
struct SyntheticSpec {
    std::size_t length = 8000;
    std::size_t season = 48;
    double amplitude = 20.0;
    double ar_coefficient = 0.7;
    double noise_std = 2.0;
    double peak_variance_factor = 1.5;
    std::uint64_t seed = 2016;
};

TimeSeries generate_synthetic(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// Experiment grid
// ---------------------------------------------------------------------------

enum class ExpertKind { Fitted, Noisy, Zero, Lagged };

std::string to_string(ExpertKind kind);

/// One benchmark row: which fraction of the train split is kept and how the
/// expert is degraded, if at all.
struct ExperimentSpec {
    int id = 1;              // experiment number, 1..5
    std::string key;         // stable row key, e.g. "2-10" or "5-zero"
    std::string description;
    double data_fraction = 1.0;
    ExpertKind expert_kind = ExpertKind::Fitted;
    // MSE triple (nn, expert, kinn) reported for this row by the original
    // PeMS Richards Ave study; a directional anchor, not a target.
    double anchor_nn = 0.0, anchor_expert = 0.0, anchor_kinn = 0.0;
};

/// The seven standard rows (experiments 1-5 with the 50%/10% and
/// zero/lagged sub-rows).
std::vector<ExperimentSpec> standard_experiments();

/// Rows matching one experiment id.
std::vector<ExperimentSpec> experiments_for_id(int id);

// ---------------------------------------------------------------------------
// Step-wise diagnostics
// ---------------------------------------------------------------------------

struct StepwiseStats {
    double exceed_vs_expert = 0.0; // fraction of steps with kinn err > expert err
    double exceed_vs_nn = 0.0;
    double near_tie_vs_expert = 0.0; // fraction with |kinn - expert| < threshold
    double near_tie_vs_nn = 0.0;
    double threshold = 1.5;
};

/// Exact counting over aligned absolute-error series; ties are not
/// exceedances.
StepwiseStats stepwise_analysis(std::span<const double> kinn_errors,
                                std::span<const double> expert_errors,
                                std::span<const double> nn_errors,
                                double near_tie_threshold);

// ---------------------------------------------------------------------------
// Running experiments
// ---------------------------------------------------------------------------

/// Everything a row needs besides the dataset: window, split, expert and
/// network settings. input_channels of `network` is derived per model.
struct ExperimentConfigs {
    std::size_t window = 3;
    SplitSpec split;
    bool use_seasonal_naive = false;
    SarimaConfig sarima;
    SarimaFitOptions sarima_fit;
    NoiseDistribution noise_distribution = NoiseDistribution::Uniform;
    std::uint64_t noise_seed = 7;
    NetworkConfig network;
    TrainOptions train_options;
    ConditioningMode mode = ConditioningMode::StackChannel;
    double near_tie_threshold = 1.5;
};

struct ExperimentResult {
    ExperimentSpec spec;
    bool failed = false;
    std::string error;

    double mse_nn = 0.0, mse_expert = 0.0, mse_kinn = 0.0; // original units
    std::size_t first_test_target = 0; // index into the aggregated series
    std::vector<double> truth;         // test-range observations
    std::vector<double> pred_nn, pred_expert, pred_kinn;
    std::vector<double> err_nn, err_expert, err_kinn; // absolute errors
    StepwiseStats stepwise;
    int epochs_to_best_nn = 0, epochs_to_best_kinn = 0; // 1-based epoch counts
    TrainReport nn_report, kinn_report;
};

/**
 * The full pipeline for one row: split 70/10/20, truncate the train split
 * to its most recent data_fraction, fit/decorate the expert, train the
 * plain network and the residual network, evaluate all three on the
 * untouched test split in original units.
 */
ExperimentResult run_experiment(const ExperimentSpec& spec,
                                const TimeSeries& aggregated,
                                const ExperimentConfigs& configs);

/// run_experiment over several specs, optionally in parallel. Failures are
/// captured per row, never thrown.
std::vector<ExperimentResult> run_experiments(
    const std::vector<ExperimentSpec>& specs, const TimeSeries& aggregated,
    const ExperimentConfigs& configs, std::size_t jobs = 1);

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

/// Table-layout CSV: experiment, description, training_data_pct, mse_dnn,
/// mse_expert, mse_kinn.
void write_results_csv(const std::vector<ExperimentResult>& results,
                       const std::string& path);

/// Versioned JSON with full diagnostics; doubles render at full precision
/// so a write/read round trip is bit-exact.
void write_results_json(const std::vector<ExperimentResult>& results,
                        const std::string& path);
std::vector<ExperimentResult> load_results_json(const std::string& path);

/// Per-step CSV: t, truth, nn, expert, kinn.
void write_predictions_csv(const ExperimentResult& result,
                           const std::string& path);

} // namespace kinn

#endif // KINN_EXPERIMENTS_HPP
