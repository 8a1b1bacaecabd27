#ifndef KINN_KINN_HPP
#define KINN_KINN_HPP

#include "kinn/expert.hpp"
#include "kinn/network.hpp"
#include "kinn/timeseries.hpp"

#include <memory>
#include <string>
#include <vector>

namespace kinn {

/**
 * How the expert's one-step prediction enters the network input:
 * appended as one extra sequence element (length p+1, one channel) or
 * stacked as a constant second channel (length p, two channels).
 */
enum class ConditioningMode { AppendToSequence, StackChannel };

std::string to_string(ConditioningMode mode);
ConditioningMode conditioning_mode_from_string(const std::string& text);

/**
 * The residual composition: the network learns a correction to the expert,
 * and the final forecast is network output plus expert prediction. The
 * scaler maps between original units and the network's standardized space.
 */
struct KinnModel {
    NetworkParams network;
    std::shared_ptr<const ExpertModel> expert;
    ConditioningMode mode = ConditioningMode::StackChannel;
    ScalerParams scaler;
    std::size_t window = 3;
};

/// Half-open target-index range [begin, end) into a series.
struct RangeSpec {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
};

/**
 * Windows of a scaled series whose targets are exactly [first_target,
 * last_target); the p values before first_target provide the first window.
 */
WindowedDataset windows_for_targets(const TimeSeries& series,
                                    std::size_t first_target,
                                    std::size_t last_target, std::size_t p);

/**
 * Inject one (already scaled) expert prediction per base window. Base must
 * be a plain ValuesOnly dataset; the result has length p+1 with the
 * prediction appended (AppendToSequence) or a constant second channel
 * carrying it (StackChannel).
 */
WindowedDataset condition_inputs(const WindowedDataset& base,
                                 const std::vector<double>& scaled_expert_preds,
                                 ConditioningMode mode);

/**
 * Residual forward pass over a conditioned batch: network output plus the
 * scaled expert prediction, mapped back to original units.
 * `expert_preds` are in original units.
 */
std::vector<double> kinn_forward(const KinnModel& model,
                                 const WindowedDataset& conditioned,
                                 const std::vector<double>& expert_preds);

struct KinnTrainResult {
    KinnModel model;
    TrainReport report;
};

/**
 * Trains the residual network: produces rolling one-step expert forecasts
 * over the train/validation target ranges (true history), conditions the
 * scaled windows on them, and regresses the scaled residual x_t - expert_t.
 * Minimizing that residual MSE is algebraically the conditioned objective.
 */
KinnTrainResult kinn_train(const NetworkConfig& base_config,
                           const TrainOptions& options,
                           std::shared_ptr<const ExpertModel> expert,
                           const TimeSeries& series, RangeSpec train_targets,
                           RangeSpec val_targets, const ScalerParams& scaler,
                           std::size_t window, ConditioningMode mode);

/**
 * One-step-ahead KINN forecasts in original units for targets
 * [first_target, last_target): expert rolling forecast, conditioning,
 * network forward, residual add-back, inverse transform.
 */
std::vector<double> kinn_predict(const KinnModel& model, const TimeSeries& series,
                                 std::size_t first_target,
                                 std::size_t last_target);

// ---------------------------------------------------------------------------
// Bundle persistence
// ---------------------------------------------------------------------------

/**
 * Writes a directory with network.ckpt, scaler.json, manifest.json and,
 * for a SARIMA expert, expert.json. Seasonal-naive experts persist through
 * the manifest alone; decorated experts are not persistable.
 */
void save_kinn_bundle(const KinnModel& model, const std::string& dir);
KinnModel load_kinn_bundle(const std::string& dir);

} // namespace kinn

#endif // KINN_KINN_HPP
