#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kinn/errors.hpp"
#include "kinn/network.hpp"
#include "kinn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

using namespace kinn;
namespace fs = std::filesystem;

namespace {

WindowedDataset random_dataset(std::size_t rows, std::size_t steps,
                               std::size_t channels, Rng& rng) {
    WindowedDataset ds;
    ds.rows = rows;
    ds.steps = steps;
    ds.channels = channels;
    ds.layout = channels == 2 ? ChannelLayout::ValuesPlusExpert
                              : ChannelLayout::ValuesOnly;
    ds.inputs.resize(rows * steps * channels);
    ds.targets.resize(rows);
    for (double& v : ds.inputs) v = rng.next_uniform(-1, 1);
    for (double& v : ds.targets) v = rng.next_uniform(-1, 1);
    return ds;
}

double loss_at(const NetworkParams& params, const WindowedDataset& ds) {
    return mse_loss(forward(params, ds), ds.targets);
}

} // namespace

// ---------------------------------------------------------------------------
// init_params
// ---------------------------------------------------------------------------

TEST_CASE("init is deterministic in the seed") {
    NetworkConfig config;
    config.layer_widths = {5, 4};
    config.activations = NetworkConfig::default_activations(2);
    config.seed = 321;
    const NetworkParams a = init_params(config);
    const NetworkParams b = init_params(config);
    CHECK(a.flat == b.flat);

    config.seed = 322;
    const NetworkParams c = init_params(config);
    CHECK(a.flat != c.flat);
}

TEST_CASE("init respects the per-gate Glorot bounds") {
    NetworkConfig config;
    config.input_channels = 2;
    config.layer_widths = {6, 3};
    config.activations = NetworkConfig::default_activations(2);
    config.seed = 9;
    const NetworkParams params = init_params(config);
    for (std::size_t l = 0; l < 2; ++l) {
        const std::size_t w = config.layer_widths[l];
        const std::size_t in = params.layer_input_dim(l);
        const double w_limit = std::sqrt(6.0 / static_cast<double>(in + w));
        const double u_limit = std::sqrt(6.0 / static_cast<double>(2 * w));
        for (std::size_t i = 0; i < 4 * w * in; ++i)
            CHECK(std::abs(params.flat[params.w_offset(l) + i]) <= w_limit);
        for (std::size_t i = 0; i < 4 * w * w; ++i)
            CHECK(std::abs(params.flat[params.u_offset(l) + i]) <= u_limit);
    }
    const double head_limit =
        std::sqrt(6.0 / static_cast<double>(config.layer_widths.back() + 1));
    for (std::size_t i = 0; i < config.layer_widths.back(); ++i)
        CHECK(std::abs(params.flat[params.head_w_offset() + i]) <= head_limit);
}

TEST_CASE("forget-gate biases start at one, all others at zero") {
    NetworkConfig config;
    config.layer_widths = {4, 4};
    config.activations = NetworkConfig::default_activations(2);
    const NetworkParams params = init_params(config);
    for (std::size_t l = 0; l < 2; ++l) {
        const std::size_t w = config.layer_widths[l];
        const double* b = params.flat.data() + params.b_offset(l);
        for (std::size_t i = 0; i < 4 * w; ++i)
            CHECK(b[i] == (i >= w && i < 2 * w ? 1.0 : 0.0));
    }
    CHECK(params.flat[params.head_b_offset()] == 0.0);
}

// ---------------------------------------------------------------------------
// forward
// ---------------------------------------------------------------------------

TEST_CASE("zero weights force a zero prediction") {
    NetworkConfig config;
    config.layer_widths = {3};
    config.activations = {Activation::Sigmoid};
    NetworkParams params = init_params(config);
    std::fill(params.flat.begin(), params.flat.end(), 0.0);
    for (std::size_t i = 3; i < 6; ++i) params.flat[params.b_offset(0) + i] = 1.0;

    Rng rng(4);
    const WindowedDataset ds = random_dataset(5, 3, 1, rng);
    for (double pred : forward(params, ds)) CHECK(pred == 0.0);
}

TEST_CASE("one LSTM cell matches the hand-derived value") {
    NetworkConfig config;
    config.layer_widths = {1};
    config.activations = {Activation::Sigmoid};
    NetworkParams params = init_params(config);
    // W gates (i,f,g,o), U gates, biases, head weight and bias.
    params.flat = {0.1, 0.2, 0.3, 0.4,  0.5, 0.6, 0.7, 0.8,
                   0.01, 1.0, 0.02, 0.03,  2.0,  0.1};

    WindowedDataset ds;
    ds.rows = 1;
    ds.steps = 1;
    ds.channels = 1;
    ds.inputs = {0.5};
    ds.targets = {0.0};
    const auto preds = forward(params, ds);
    // Derived by evaluating the cell equations independently:
    // i=s(0.06), g=tanh(0.17), o=s(0.23), c=i*g, y=s(o*tanh(c)), 2y+0.1.
    CHECK(preds[0] == doctest::Approx(1.1240959642365829).epsilon(1e-12));
}

TEST_CASE("identical rows give identical predictions") {
    NetworkConfig config;
    config.layer_widths = {4, 3};
    config.activations = NetworkConfig::default_activations(2);
    config.seed = 77;
    const NetworkParams params = init_params(config);

    WindowedDataset ds;
    ds.rows = 2;
    ds.steps = 3;
    ds.channels = 1;
    ds.inputs = {0.3, -0.4, 0.9, 0.3, -0.4, 0.9};
    ds.targets = {1.0, 1.0};
    const auto preds = forward(params, ds);
    CHECK(preds[0] == preds[1]);
}

TEST_CASE("forward rejects a channel mismatch") {
    NetworkConfig config;
    config.input_channels = 2;
    config.layer_widths = {3};
    config.activations = {Activation::Sigmoid};
    const NetworkParams params = init_params(config);
    Rng rng(1);
    const WindowedDataset ds = random_dataset(2, 3, 1, rng);
    CHECK_THROWS_AS(forward(params, ds), ConfigError);
}

// ---------------------------------------------------------------------------
// mse_loss
// ---------------------------------------------------------------------------

TEST_CASE("mse_loss hand values") {
    CHECK(mse_loss(std::vector<double>{1, 2}, std::vector<double>{1, 4}) == 2.0);
    CHECK(mse_loss(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) ==
          0.0);
    CHECK(mse_loss(std::vector<double>{0}, std::vector<double>{3}) == 9.0);
    CHECK_THROWS_AS(mse_loss(std::vector<double>{1}, std::vector<double>{1, 2}),
                    ConfigError);
    CHECK_THROWS_AS(mse_loss(std::vector<double>{}, std::vector<double>{}),
                    ConfigError);
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

TEST_CASE("head-bias gradient has its closed form on one sample") {
    NetworkConfig config;
    config.layer_widths = {3};
    config.activations = {Activation::Sigmoid};
    config.seed = 15;
    const NetworkParams params = init_params(config);
    Rng rng(16);
    const WindowedDataset ds = random_dataset(1, 3, 1, rng);
    const BackwardResult result = backward(params, ds);
    const double expected = 2.0 * (result.predictions[0] - ds.targets[0]);
    CHECK(result.gradients[params.head_b_offset()] ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng meta(20250811);
    for (int trial = 0; trial < 20; ++trial) {
        NetworkConfig config;
        const std::size_t n_layers = 1 + meta.next_index(2);
        config.layer_widths.clear();
        for (std::size_t l = 0; l < n_layers; ++l)
            config.layer_widths.push_back(2 + meta.next_index(3)); // 2..4
        config.activations.clear();
        for (std::size_t l = 0; l < n_layers; ++l)
            config.activations.push_back(meta.next_bits() & 1
                                             ? Activation::Relu
                                             : Activation::Sigmoid);
        config.input_channels = 1 + meta.next_index(2);
        config.seed = meta.next_bits();
        NetworkParams params = init_params(config);
        // Move off the structured zeros of a fresh init; exact zeros can put
        // hidden states right on the ReLU kink where central differences
        // straddle the non-differentiable point.
        Rng jitter(meta.next_bits());
        for (double& v : params.flat) v += jitter.next_uniform(-0.25, 0.25);

        Rng data_rng(meta.next_bits());
        const std::size_t rows = 1 + data_rng.next_index(8);
        const std::size_t steps = 1 + data_rng.next_index(4);
        const WindowedDataset ds =
            random_dataset(rows, steps, config.input_channels, data_rng);

        const BackwardResult analytic = backward(params, ds);
        const double h = 1e-5;
        double worst = 0.0;
        for (std::size_t i = 0; i < params.flat.size(); ++i) {
            const double keep = params.flat[i];
            params.flat[i] = keep + h;
            const double up = loss_at(params, ds);
            params.flat[i] = keep - h;
            const double down = loss_at(params, ds);
            params.flat[i] = keep;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic.gradients[i];
            const double rel = std::abs(a - numeric) /
                               std::max({std::abs(a), std::abs(numeric), 1e-6});
            worst = std::max(worst, rel);
        }
        CAPTURE(trial);
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("zero input and zero weights give zero input-gate gradients") {
    NetworkConfig config;
    config.layer_widths = {3};
    config.activations = {Activation::Sigmoid};
    NetworkParams params = init_params(config);
    std::fill(params.flat.begin(), params.flat.end(), 0.0);

    WindowedDataset ds;
    ds.rows = 1;
    ds.steps = 2;
    ds.channels = 1;
    ds.inputs = {0.0, 0.0};
    ds.targets = {1.0};
    const BackwardResult result = backward(params, ds);
    // Input-gate rows of W: gradient = da_i * x with x = 0.
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(result.gradients[params.w_offset(0) + i] == 0.0);
}

// ---------------------------------------------------------------------------
// adam_step
// ---------------------------------------------------------------------------

TEST_CASE("zero gradients leave parameters unchanged and decay moments") {
    std::vector<double> params{1.0, -2.0};
    AdamState state(2);
    const std::vector<double> zeros{0.0, 0.0};
    adam_step(params, zeros, state);
    CHECK(params[0] == 1.0);
    CHECK(params[1] == -2.0);
    CHECK(state.step == 1);

    // A zero-gradient step after a real one decays the moments by beta.
    const std::vector<double> grads{1.0, 1.0};
    adam_step(params, grads, state);
    const double m_before = state.m[0], v_before = state.v[0];
    adam_step(params, zeros, state);
    CHECK(state.m[0] == doctest::Approx(0.9 * m_before));
    CHECK(state.v[0] == doctest::Approx(0.999 * v_before));
}

TEST_CASE("the first step is the sign-scaled learning rate") {
    std::vector<double> params{0.0, 0.0, 0.0};
    AdamState state(3, 1e-3);
    const std::vector<double> grads{3.0, -2.0, 0.5};
    adam_step(params, grads, state);
    CHECK(state.step == 1);
    for (std::size_t i = 0; i < 3; ++i) {
        const double expected = -1e-3 * (grads[i] > 0 ? 1.0 : -1.0);
        CHECK(params[i] == doctest::Approx(expected).epsilon(1e-5));
    }
}

TEST_CASE("adam is deterministic") {
    std::vector<double> p1{0.3, 0.7}, p2{0.3, 0.7};
    AdamState s1(2), s2(2);
    const std::vector<double> grads{0.1, -0.9};
    for (int k = 0; k < 5; ++k) {
        adam_step(p1, grads, s1);
        adam_step(p2, grads, s2);
    }
    CHECK(p1 == p2);
    CHECK(s1.m == s2.m);
    CHECK(s1.v == s2.v);
}

TEST_CASE("adam rejects shape mismatches") {
    std::vector<double> params{1.0};
    AdamState state(2);
    CHECK_THROWS_AS(adam_step(params, std::vector<double>{0.1}, state),
                    ConfigError);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

namespace {

NetworkConfig small_config(std::uint64_t seed) {
    NetworkConfig config;
    config.layer_widths = {4};
    config.activations = {Activation::Sigmoid};
    config.seed = seed;
    return config;
}

} // namespace

TEST_CASE("zero epochs return the initial parameters") {
    Rng rng(3);
    const WindowedDataset ds = random_dataset(6, 2, 1, rng);
    TrainOptions options;
    options.epochs = 0;
    const TrainResult result = train(small_config(8), ds, ds, options);
    CHECK(result.report.train_loss.empty());
    CHECK(result.report.val_loss.empty());
    CHECK(result.report.best_epoch == -1);
    CHECK(result.params.flat == init_params(small_config(8)).flat);
}

TEST_CASE("training fits a constant target quickly") {
    Rng rng(12);
    WindowedDataset ds = random_dataset(16, 3, 1, rng);
    std::fill(ds.targets.begin(), ds.targets.end(), 0.6);
    TrainOptions options;
    options.epochs = 200;
    options.batch_size = 4;
    options.learning_rate = 5e-3;
    options.seed = 1;
    const TrainResult result = train(small_config(21), ds, ds, options);
    CHECK(result.report.train_loss.back() < 1e-3);
}

TEST_CASE("best_epoch is the argmin of the validation losses") {
    Rng rng(14);
    const WindowedDataset train_ds = random_dataset(12, 2, 1, rng);
    const WindowedDataset val_ds = random_dataset(6, 2, 1, rng);
    TrainOptions options;
    options.epochs = 25;
    options.batch_size = 4;
    options.seed = 2;
    const TrainResult result = train(small_config(5), train_ds, val_ds, options);
    const auto& val = result.report.val_loss;
    const auto it = std::min_element(val.begin(), val.end());
    CHECK(result.report.best_epoch == static_cast<int>(it - val.begin()));
    CHECK(result.report.best_val_loss == *it);
}

TEST_CASE("the returned snapshot reproduces the best validation loss") {
    Rng rng(15);
    const WindowedDataset train_ds = random_dataset(12, 2, 1, rng);
    const WindowedDataset val_ds = random_dataset(6, 2, 1, rng);
    TrainOptions options;
    options.epochs = 15;
    options.batch_size = 4;
    options.seed = 3;
    const TrainResult result = train(small_config(6), train_ds, val_ds, options);
    const double re_eval = mse_loss(forward(result.params, val_ds), val_ds.targets);
    CHECK(re_eval == doctest::Approx(result.report.best_val_loss).epsilon(1e-12));
}

TEST_CASE("training is bitwise deterministic") {
    Rng rng(16);
    const WindowedDataset train_ds = random_dataset(10, 2, 1, rng);
    const WindowedDataset val_ds = random_dataset(5, 2, 1, rng);
    TrainOptions options;
    options.epochs = 10;
    options.batch_size = 3;
    options.seed = 4;
    const TrainResult a = train(small_config(7), train_ds, val_ds, options);
    const TrainResult b = train(small_config(7), train_ds, val_ds, options);
    CHECK(a.report.train_loss == b.report.train_loss);
    CHECK(a.report.val_loss == b.report.val_loss);
    CHECK(a.report.best_epoch == b.report.best_epoch);
    CHECK(a.params.flat == b.params.flat);
}

TEST_CASE("an absurd learning rate aborts loudly") {
    Rng rng(17);
    const WindowedDataset ds = random_dataset(6, 2, 1, rng);
    TrainOptions options;
    options.epochs = 10;
    options.batch_size = 16; // one batch per epoch
    options.learning_rate = 1e200;
    CHECK_THROWS_AS(train(small_config(9), ds, ds, options), ComputeError);
}

TEST_CASE("shuffling batch rows permutes predictions and keeps the loss") {
    NetworkConfig config = small_config(30);
    const NetworkParams params = init_params(config);
    Rng rng(18);
    const WindowedDataset ds = random_dataset(9, 3, 1, rng);

    std::vector<std::size_t> order(ds.rows);
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::size_t> shuffled = order;
    Rng shuffle_rng(19);
    shuffle_rng.shuffle(shuffled);

    const auto straight = forward(params, ds, order);
    const auto permuted = forward(params, ds, shuffled);
    for (std::size_t i = 0; i < shuffled.size(); ++i)
        CHECK(permuted[i] == straight[shuffled[i]]);

    std::vector<double> t1(ds.rows), t2(ds.rows);
    for (std::size_t i = 0; i < ds.rows; ++i) {
        t1[i] = ds.targets[order[i]];
        t2[i] = ds.targets[shuffled[i]];
    }
    CHECK(mse_loss(straight, t1) ==
          doctest::Approx(mse_loss(permuted, t2)).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

TEST_CASE("checkpoint round trip is bitwise exact") {
    NetworkConfig config;
    config.input_channels = 2;
    config.layer_widths = {5, 3};
    config.activations = {Activation::Relu, Activation::Sigmoid};
    config.seed = 99;
    const NetworkParams params = init_params(config);
    const auto path = (fs::temp_directory_path() / "kinn_ckpt_rt.bin").string();
    save_checkpoint(params, path);
    const NetworkParams back = load_checkpoint(path);
    CHECK(back.flat == params.flat);
    CHECK(back.config.input_channels == 2);
    CHECK(back.config.layer_widths == config.layer_widths);
    CHECK(back.config.activations == config.activations);
    CHECK(back.config.seed == 99);
}

TEST_CASE("a truncated checkpoint is rejected as corrupt") {
    NetworkConfig config;
    config.layer_widths = {3};
    config.activations = {Activation::Sigmoid};
    const NetworkParams params = init_params(config);
    const auto path = (fs::temp_directory_path() / "kinn_ckpt_trunc.bin").string();
    save_checkpoint(params, path);
    const auto size = fs::file_size(path);
    fs::resize_file(path, size / 2);
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("corrupt"),
                         IoError);
}

TEST_CASE("a bumped format version is rejected as a version error") {
    NetworkConfig config;
    config.layer_widths = {3};
    config.activations = {Activation::Sigmoid};
    const NetworkParams params = init_params(config);
    const auto path = (fs::temp_directory_path() / "kinn_ckpt_ver.bin").string();
    save_checkpoint(params, path);
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    f.put(9); // version byte
    f.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version"),
                         IoError);
}

TEST_CASE("trailing bytes are rejected") {
    NetworkConfig config;
    config.layer_widths = {2};
    config.activations = {Activation::Sigmoid};
    const NetworkParams params = init_params(config);
    const auto path = (fs::temp_directory_path() / "kinn_ckpt_tail.bin").string();
    save_checkpoint(params, path);
    std::ofstream(path, std::ios::app | std::ios::binary) << "junk";
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
}
