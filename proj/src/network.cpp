#include "kinn/network.hpp"
#include "kinn/errors.hpp"
#include "kinn/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

namespace kinn {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double apply_activation(Activation a, double h) {
    return a == Activation::Sigmoid ? sigmoid(h) : (h > 0.0 ? h : 0.0);
}

// Derivative of the output activation, written in terms of the raw hidden
// value h and the activated value y.
inline double activation_grad(Activation a, double h, double y) {
    return a == Activation::Sigmoid ? y * (1.0 - y) : (h > 0.0 ? 1.0 : 0.0);
}

} // namespace

// ---------------------------------------------------------------------------
// Config and layout
// ---------------------------------------------------------------------------

std::vector<Activation> NetworkConfig::default_activations(std::size_t layers) {
    std::vector<Activation> acts(layers, Activation::Relu);
    if (!acts.empty()) acts[0] = Activation::Sigmoid;
    return acts;
}

void NetworkConfig::validate() const {
    if (input_channels != 1 && input_channels != 2)
        throw ConfigError("input_channels must be 1 or 2");
    if (layer_widths.empty()) throw ConfigError("need at least one LSTM layer");
    for (std::size_t w : layer_widths)
        if (w == 0) throw ConfigError("layer widths must be positive");
    if (activations.size() != layer_widths.size())
        throw ConfigError("activations must match the layer count");
}

std::size_t NetworkParams::layer_input_dim(std::size_t layer) const {
    return layer == 0 ? config.input_channels : config.layer_widths[layer - 1];
}

std::size_t NetworkParams::w_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) {
        const std::size_t w = config.layer_widths[l];
        off += 4 * w * layer_input_dim(l) + 4 * w * w + 4 * w;
    }
    return off;
}

std::size_t NetworkParams::u_offset(std::size_t layer) const {
    return w_offset(layer) + 4 * config.layer_widths[layer] * layer_input_dim(layer);
}

std::size_t NetworkParams::b_offset(std::size_t layer) const {
    const std::size_t w = config.layer_widths[layer];
    return u_offset(layer) + 4 * w * w;
}

std::size_t NetworkParams::head_w_offset() const {
    return w_offset(config.layer_widths.size());
}

std::size_t NetworkParams::head_b_offset() const {
    return head_w_offset() + config.layer_widths.back();
}

std::size_t NetworkParams::total_size() const { return head_b_offset() + 1; }

std::string NetworkParams::block_name(std::size_t i) const {
    for (std::size_t l = 0; l < config.layer_widths.size(); ++l) {
        if (i < u_offset(l)) return "layer" + std::to_string(l) + ".W";
        if (i < b_offset(l)) return "layer" + std::to_string(l) + ".U";
        if (i < w_offset(l + 1)) return "layer" + std::to_string(l) + ".b";
    }
    return i < head_b_offset() ? "head.w" : "head.b";
}

NetworkParams init_params(const NetworkConfig& config) {
    config.validate();
    NetworkParams params;
    params.config = config;
    params.flat.assign(params.total_size(), 0.0);

    Rng rng = Rng::derive(config.seed, 0x696e6974ULL); // "init"
    const std::size_t layers = config.layer_widths.size();
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t w = config.layer_widths[l];
        const std::size_t in = params.layer_input_dim(l);
        // Each gate's slice is treated as its own (w x fan_in) matrix for the
        // Glorot bounds; the fused storage is just layout.
        const double w_limit = std::sqrt(6.0 / static_cast<double>(in + w));
        const double u_limit = std::sqrt(6.0 / static_cast<double>(w + w));
        double* W = params.flat.data() + params.w_offset(l);
        double* U = params.flat.data() + params.u_offset(l);
        double* b = params.flat.data() + params.b_offset(l);
        for (std::size_t i = 0; i < 4 * w * in; ++i)
            W[i] = rng.next_uniform(-w_limit, w_limit);
        for (std::size_t i = 0; i < 4 * w * w; ++i)
            U[i] = rng.next_uniform(-u_limit, u_limit);
        // Forget-gate bias starts at 1 so early cell states persist.
        for (std::size_t i = w; i < 2 * w; ++i) b[i] = 1.0;
    }
    const std::size_t top = config.layer_widths.back();
    const double head_limit = std::sqrt(6.0 / static_cast<double>(top + 1));
    double* head = params.flat.data() + params.head_w_offset();
    for (std::size_t i = 0; i < top; ++i)
        head[i] = rng.next_uniform(-head_limit, head_limit);
    return params;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

namespace {

// Per-row, per-layer activation record kept for backpropagation.
struct LayerTrace {
    std::vector<double> gates;    // T x 4w, post-nonlinearity (i,f,g,o)
    std::vector<double> cell;     // T x w
    std::vector<double> tanh_cell;// T x w
    std::vector<double> hidden;   // T x w, raw h
    std::vector<double> output;   // T x w, activated h
};

// Scratch buffers reused across samples within one forward/backward call.
struct Workspace {
    std::vector<double> input, h, c, gates, next_input;
};

// Runs one sample through the stack. `trace` may be null for predict-only.
double run_forward(const NetworkParams& params, const double* row_input,
                   std::size_t steps, std::vector<LayerTrace>* trace,
                   Workspace& ws) {
    const auto& cfg = params.config;
    const std::size_t layers = cfg.layer_widths.size();
    auto& input = ws.input;
    input.assign(row_input, row_input + steps * cfg.input_channels);

    auto& h = ws.h;
    auto& c = ws.c;
    auto& gates = ws.gates;
    auto& next_input = ws.next_input;
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t w = cfg.layer_widths[l];
        const std::size_t in = params.layer_input_dim(l);
        const double* W = params.flat.data() + params.w_offset(l);
        const double* U = params.flat.data() + params.u_offset(l);
        const double* b = params.flat.data() + params.b_offset(l);

        LayerTrace* lt = trace ? &(*trace)[l] : nullptr;
        if (lt) {
            lt->gates.resize(steps * 4 * w);
            lt->cell.resize(steps * w);
            lt->tanh_cell.resize(steps * w);
            lt->hidden.resize(steps * w);
            lt->output.resize(steps * w);
        }

        h.assign(w, 0.0);
        c.assign(w, 0.0);
        gates.assign(4 * w, 0.0);
        next_input.assign(steps * w, 0.0);

        for (std::size_t t = 0; t < steps; ++t) {
            const double* x = input.data() + t * in;
            for (std::size_t r = 0; r < 4 * w; ++r) {
                double acc = b[r];
                const double* wr = W + r * in;
                for (std::size_t k = 0; k < in; ++k) acc += wr[k] * x[k];
                const double* ur = U + r * w;
                for (std::size_t k = 0; k < w; ++k) acc += ur[k] * h[k];
                gates[r] = acc;
            }
            for (std::size_t k = 0; k < w; ++k) {
                const double gi = sigmoid(gates[k]);
                const double gf = sigmoid(gates[w + k]);
                const double gg = std::tanh(gates[2 * w + k]);
                const double go = sigmoid(gates[3 * w + k]);
                const double ck = gf * c[k] + gi * gg;
                const double tck = std::tanh(ck);
                const double hk = go * tck;
                const double yk = apply_activation(cfg.activations[l], hk);
                c[k] = ck;
                h[k] = hk;
                next_input[t * w + k] = yk;
                if (lt) {
                    lt->gates[t * 4 * w + k] = gi;
                    lt->gates[t * 4 * w + w + k] = gf;
                    lt->gates[t * 4 * w + 2 * w + k] = gg;
                    lt->gates[t * 4 * w + 3 * w + k] = go;
                    lt->cell[t * w + k] = ck;
                    lt->tanh_cell[t * w + k] = tck;
                    lt->hidden[t * w + k] = hk;
                    lt->output[t * w + k] = yk;
                }
            }
        }
        input.swap(next_input);
    }

    const std::size_t top = cfg.layer_widths.back();
    const double* head = params.flat.data() + params.head_w_offset();
    double pred = params.flat[params.head_b_offset()];
    const double* y_last = input.data() + (steps - 1) * top;
    for (std::size_t k = 0; k < top; ++k) pred += head[k] * y_last[k];
    return pred;
}

std::vector<std::size_t> all_rows(const WindowedDataset& data) {
    std::vector<std::size_t> rows(data.rows);
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

void check_shapes(const NetworkParams& params, const WindowedDataset& data) {
    if (data.channels != params.config.input_channels)
        throw ConfigError("dataset has " + std::to_string(data.channels) +
                          " channels but the network expects " +
                          std::to_string(params.config.input_channels));
    if (data.steps == 0 || data.rows == 0)
        throw ConfigError("empty dataset");
    if (params.flat.size() != params.total_size())
        throw ConfigError("parameter vector does not match the network layout");
}

} // namespace

std::vector<double> forward(const NetworkParams& params,
                            const WindowedDataset& data,
                            std::span<const std::size_t> rows) {
    check_shapes(params, data);
    std::vector<std::size_t> fallback;
    if (rows.empty()) {
        fallback = all_rows(data);
        rows = fallback;
    }
    std::vector<double> preds(rows.size());
    const std::size_t stride = data.steps * data.channels;
    Workspace ws;
    for (std::size_t i = 0; i < rows.size(); ++i)
        preds[i] = run_forward(params, data.inputs.data() + rows[i] * stride,
                               data.steps, nullptr, ws);
    return preds;
}

double mse_loss(std::span<const double> predictions,
                std::span<const double> targets) {
    if (predictions.size() != targets.size())
        throw ConfigError("prediction/target length mismatch");
    if (predictions.empty()) throw ConfigError("empty loss input");
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - targets[i];
        sum += d * d;
    }
    return sum / static_cast<double>(predictions.size());
}

BackwardResult backward(const NetworkParams& params, const WindowedDataset& data,
                        std::span<const std::size_t> rows) {
    check_shapes(params, data);
    std::vector<std::size_t> fallback;
    if (rows.empty()) {
        fallback = all_rows(data);
        rows = fallback;
    }

    const auto& cfg = params.config;
    const std::size_t layers = cfg.layer_widths.size();
    const std::size_t steps = data.steps;
    const std::size_t stride = steps * data.channels;
    const std::size_t batch = rows.size();

    BackwardResult result;
    result.gradients.assign(params.flat.size(), 0.0);
    result.predictions.resize(batch);

    std::vector<LayerTrace> trace(layers);
    Workspace ws;
    // dy holds the gradient w.r.t. a layer's activated output sequence; dx
    // receives the gradient passed down to the layer below.
    std::vector<double> dy, dx, dh, dc, da;

    double loss_sum = 0.0;
    for (std::size_t bi = 0; bi < batch; ++bi) {
        const double* row = data.inputs.data() + rows[bi] * stride;
        const double pred = run_forward(params, row, steps, &trace, ws);
        result.predictions[bi] = pred;
        const double err = pred - data.targets[rows[bi]];
        loss_sum += err * err;
        const double dpred = 2.0 * err / static_cast<double>(batch);

        // Head gradients; seed the top layer's output gradient.
        const std::size_t top = cfg.layer_widths.back();
        double* g_head = result.gradients.data() + params.head_w_offset();
        const double* y_top = trace[layers - 1].output.data() + (steps - 1) * top;
        for (std::size_t k = 0; k < top; ++k) g_head[k] += dpred * y_top[k];
        result.gradients[params.head_b_offset()] += dpred;

        const double* head_w = params.flat.data() + params.head_w_offset();
        dy.assign(steps * top, 0.0);
        for (std::size_t k = 0; k < top; ++k)
            dy[(steps - 1) * top + k] = dpred * head_w[k];

        for (std::size_t l = layers; l-- > 0;) {
            const std::size_t w = cfg.layer_widths[l];
            const std::size_t in = params.layer_input_dim(l);
            const LayerTrace& lt = trace[l];
            const double* W = params.flat.data() + params.w_offset(l);
            const double* U = params.flat.data() + params.u_offset(l);
            double* gW = result.gradients.data() + params.w_offset(l);
            double* gU = result.gradients.data() + params.u_offset(l);
            double* gb = result.gradients.data() + params.b_offset(l);

            dx.assign(steps * in, 0.0);
            dh.assign(w, 0.0); // recurrent dL/dh_{t}
            dc.assign(w, 0.0); // recurrent dL/dc_{t}
            da.assign(4 * w, 0.0);

            for (std::size_t t = steps; t-- > 0;) {
                const double* gi = lt.gates.data() + t * 4 * w;
                const double* gf = gi + w;
                const double* gg = gi + 2 * w;
                const double* go = gi + 3 * w;
                const double* tck = lt.tanh_cell.data() + t * w;
                const double* hk = lt.hidden.data() + t * w;
                const double* yk = lt.output.data() + t * w;

                for (std::size_t k = 0; k < w; ++k) {
                    // Total gradient on h_t: output path plus recurrence.
                    const double dht =
                        dh[k] + dy[t * w + k] * activation_grad(
                                    cfg.activations[l], hk[k], yk[k]);
                    const double dot = dht * tck[k];
                    const double dct = dc[k] + dht * go[k] * (1.0 - tck[k] * tck[k]);
                    const double c_prev =
                        t > 0 ? lt.cell[(t - 1) * w + k] : 0.0;
                    const double dit = dct * gg[k];
                    const double dft = dct * c_prev;
                    const double dgt = dct * gi[k];
                    da[k] = dit * gi[k] * (1.0 - gi[k]);
                    da[w + k] = dft * gf[k] * (1.0 - gf[k]);
                    da[2 * w + k] = dgt * (1.0 - gg[k] * gg[k]);
                    da[3 * w + k] = dot * go[k] * (1.0 - go[k]);
                    dc[k] = dct * gf[k];
                }

                const double* x_t =
                    l == 0 ? row + t * in : trace[l - 1].output.data() + t * in;
                const double* h_prev =
                    t > 0 ? lt.hidden.data() + (t - 1) * w : nullptr;

                std::fill(dh.begin(), dh.end(), 0.0);
                for (std::size_t r = 0; r < 4 * w; ++r) {
                    const double a = da[r];
                    if (a == 0.0) continue;
                    double* gWr = gW + r * in;
                    const double* Wr = W + r * in;
                    for (std::size_t k = 0; k < in; ++k) {
                        gWr[k] += a * x_t[k];
                        dx[t * in + k] += a * Wr[k];
                    }
                    if (h_prev) {
                        double* gUr = gU + r * w;
                        for (std::size_t k = 0; k < w; ++k)
                            gUr[k] += a * h_prev[k];
                    }
                    const double* Ur = U + r * w;
                    for (std::size_t k = 0; k < w; ++k) dh[k] += a * Ur[k];
                    gb[r] += a;
                }
            }
            dy.swap(dx); // becomes the output gradient of the layer below
        }
    }

    result.loss = loss_sum / static_cast<double>(batch);
    for (std::size_t i = 0; i < result.gradients.size(); ++i) {
        if (!std::isfinite(result.gradients[i]))
            throw ComputeError("non-finite gradient in block " +
                               params.block_name(i));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void adam_step(std::vector<double>& params, std::span<const double> gradients,
               AdamState& state) {
    if (params.size() != gradients.size() || params.size() != state.m.size())
        throw ConfigError("Adam state/parameter shape mismatch");
    state.step += 1;
    const double b1t = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double b2t = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = gradients[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double mhat = state.m[i] / b1t;
        const double vhat = state.v[i] / b2t;
        params[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TrainResult train(const NetworkConfig& config, const WindowedDataset& train_ds,
                  const WindowedDataset& val_ds, const TrainOptions& options) {
    if (train_ds.rows == 0 || val_ds.rows == 0)
        throw ConfigError("training needs non-empty train and validation sets");
    if (train_ds.channels != val_ds.channels || train_ds.steps != val_ds.steps)
        throw ConfigError("train/validation window shapes differ");
    if (options.batch_size == 0) throw ConfigError("batch size must be positive");

    TrainResult out;
    out.params = init_params(config);
    out.report.best_val_loss = std::numeric_limits<double>::quiet_NaN();

    AdamState adam(out.params.flat.size(), options.learning_rate);
    Rng shuffle_rng = Rng::derive(options.seed, 0x73687566ULL); // "shuf"

    std::vector<std::size_t> order(train_ds.rows);
    std::iota(order.begin(), order.end(), 0);

    NetworkParams best = out.params;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = -1;

    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size();
             begin += options.batch_size) {
            const std::size_t end =
                std::min(begin + options.batch_size, order.size());
            const std::span<const std::size_t> batch(order.data() + begin,
                                                     end - begin);
            BackwardResult step = backward(out.params, train_ds, batch);
            loss_sum += step.loss * static_cast<double>(batch.size());
            adam_step(out.params.flat, step.gradients, adam);
        }
        const double train_loss = loss_sum / static_cast<double>(train_ds.rows);

        const auto val_preds = forward(out.params, val_ds);
        const double val_loss = mse_loss(val_preds, val_ds.targets);

        if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
            throw ComputeError("training diverged at epoch " +
                               std::to_string(epoch));

        out.report.train_loss.push_back(train_loss);
        out.report.val_loss.push_back(val_loss);
        if (val_loss < best_val) {
            best_val = val_loss;
            best_epoch = static_cast<int>(epoch);
            best = out.params;
        }
    }

    if (best_epoch >= 0) {
        out.params = best;
        out.report.best_epoch = best_epoch;
        out.report.best_val_loss = best_val;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'K', 'I', 'N', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

bool read_u32(std::istream& in, std::uint32_t& v) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return true;
}

bool read_u64(std::istream& in, std::uint64_t& v) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return true;
}

} // namespace

void save_checkpoint(const NetworkParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(params.config.input_channels));
    write_u32(out, static_cast<std::uint32_t>(params.config.layer_widths.size()));
    for (std::size_t w : params.config.layer_widths)
        write_u32(out, static_cast<std::uint32_t>(w));
    for (Activation a : params.config.activations)
        out.put(static_cast<char>(a));
    write_u64(out, params.config.seed);
    write_u64(out, params.flat.size());
    for (double d : params.flat) write_u64(out, std::bit_cast<std::uint64_t>(d));
    if (!out) throw IoError("write failed: " + path);
}

NetworkParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);

    char magic[8];
    if (!in.read(magic, sizeof(magic)) ||
        std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("corrupt checkpoint (bad magic): " + path);

    std::uint32_t version = 0;
    if (!read_u32(in, version))
        throw IoError("corrupt checkpoint (truncated header): " + path);
    if (version != kVersion)
        throw IoError("unsupported checkpoint version " +
                      std::to_string(version) + " in " + path);

    NetworkParams params;
    std::uint32_t channels = 0, layers = 0;
    if (!read_u32(in, channels) || !read_u32(in, layers) || layers == 0)
        throw IoError("corrupt checkpoint (truncated config): " + path);
    params.config.input_channels = channels;
    params.config.layer_widths.resize(layers);
    for (auto& w : params.config.layer_widths) {
        std::uint32_t v = 0;
        if (!read_u32(in, v)) throw IoError("corrupt checkpoint: " + path);
        w = v;
    }
    params.config.activations.resize(layers);
    for (auto& a : params.config.activations) {
        const int c = in.get();
        if (c < 0 || c > 1) throw IoError("corrupt checkpoint: " + path);
        a = static_cast<Activation>(c);
    }
    std::uint64_t seed = 0, count = 0;
    if (!read_u64(in, seed) || !read_u64(in, count))
        throw IoError("corrupt checkpoint (truncated config): " + path);
    params.config.seed = seed;
    params.config.validate();
    if (count != params.total_size())
        throw IoError("corrupt checkpoint (parameter count mismatch): " + path);

    params.flat.resize(count);
    for (auto& d : params.flat) {
        std::uint64_t bits = 0;
        if (!read_u64(in, bits))
            throw IoError("corrupt checkpoint (truncated data): " + path);
        d = std::bit_cast<double>(bits);
    }
    in.peek();
    if (!in.eof()) throw IoError("corrupt checkpoint (trailing bytes): " + path);
    return params;
}

} // namespace kinn
