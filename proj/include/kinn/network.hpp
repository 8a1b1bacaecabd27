#ifndef KINN_NETWORK_HPP
#define KINN_NETWORK_HPP

#include "kinn/timeseries.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace kinn {

enum class Activation : std::uint8_t { Sigmoid = 0, Relu = 1 };

/**
 * Stacked-LSTM regressor description. Each layer's hidden-state sequence
 * passes through its output activation before feeding the next layer; the
 * dense head reads the top layer's activated output at the final step.
 * Gate nonlinearities are the standard sigmoid/tanh.
 */
struct NetworkConfig {
    std::size_t input_channels = 1;
    std::vector<std::size_t> layer_widths = {64, 64, 64};
    std::vector<Activation> activations = {Activation::Sigmoid,
                                           Activation::Relu, Activation::Relu};
    std::uint64_t seed = 0;

    void validate() const;

    /// Default activation list for a layer count: sigmoid first, ReLU after.
    static std::vector<Activation> default_activations(std::size_t layers);
};

/**
 * All weights as one flat float64 vector. Per layer, in order: the fused
 * input matrix W (4w x in), the fused recurrent matrix U (4w x w) and the
 * bias (4w), gate rows packed input/forget/candidate/output; after the
 * layers, the dense head weights (w_top) and bias (1). The flat layout is
 * what the Adam state, checkpoints and gradient checks operate on.
 */
struct NetworkParams {
    NetworkConfig config;
    std::vector<double> flat;

    std::size_t layer_input_dim(std::size_t layer) const;
    std::size_t w_offset(std::size_t layer) const;
    std::size_t u_offset(std::size_t layer) const;
    std::size_t b_offset(std::size_t layer) const;
    std::size_t head_w_offset() const;
    std::size_t head_b_offset() const;
    std::size_t total_size() const;

    /// Human-readable name of the block containing flat index `i`.
    std::string block_name(std::size_t i) const;
};

/**
 * Glorot-uniform weights (per-gate fan-in/fan-out), zero biases except the
 * forget gate's, which starts at 1. Deterministic in config.seed.
 */
NetworkParams init_params(const NetworkConfig& config);

/// Predictions for the given dataset rows (all rows if `rows` is empty).
std::vector<double> forward(const NetworkParams& params,
                            const WindowedDataset& data,
                            std::span<const std::size_t> rows = {});

/// Mean squared error. Lengths must match and be nonzero.
double mse_loss(std::span<const double> predictions,
                std::span<const double> targets);

struct BackwardResult {
    std::vector<double> gradients; // same flat layout as NetworkParams
    std::vector<double> predictions;
    double loss = 0.0;
};

/**
 * Exact gradient of mse_loss(forward(rows), targets(rows)) with respect to
 * every parameter, by backpropagation through time. Raises ComputeError
 * naming the parameter block if a non-finite gradient appears.
 */
BackwardResult backward(const NetworkParams& params, const WindowedDataset& data,
                        std::span<const std::size_t> rows = {});

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<double> m; // first moments
    std::vector<double> v; // second moments

    explicit AdamState(std::size_t size, double lr = 1e-3)
        : learning_rate(lr), m(size, 0.0), v(size, 0.0) {}
};

/// One bias-corrected Adam update, in place.
void adam_step(std::vector<double>& params, std::span<const double> gradients,
               AdamState& state);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainOptions {
    std::size_t epochs = 600;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

struct TrainReport {
    std::vector<double> train_loss; // one entry per epoch
    std::vector<double> val_loss;
    int best_epoch = -1;            // argmin of val_loss (first attaining)
    double best_val_loss = 0.0;
};

struct TrainResult {
    NetworkParams params; // snapshot from the best validation epoch
    TrainReport report;
};

/**
 * Seeded-permutation minibatch training with Adam. Keeps the parameter
 * snapshot of the epoch with the lowest validation loss. A non-finite loss
 * aborts with ComputeError naming the epoch.
 */
TrainResult train(const NetworkConfig& config, const WindowedDataset& train_ds,
                  const WindowedDataset& val_ds, const TrainOptions& options);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

/// Binary checkpoint: magic, format version, config echo, raw little-endian
/// float64 parameter block. Load of a saved file is bitwise identity.
void save_checkpoint(const NetworkParams& params, const std::string& path);
NetworkParams load_checkpoint(const std::string& path);

} // namespace kinn

#endif // KINN_NETWORK_HPP
