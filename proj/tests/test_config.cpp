#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kinn/config.hpp"
#include "kinn/errors.hpp"

#include <filesystem>
#include <fstream>

using namespace kinn;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const auto path = (fs::temp_directory_path() / name).string();
    std::ofstream out(path);
    out << content;
    return path;
}

} // namespace

TEST_CASE("defaults survive an empty config") {
    const RunConfig config = RunConfig::load("");
    CHECK(config.dataset_kind == "synthetic");
    CHECK(config.synthetic.length == 8000);
    CHECK(config.synthetic.season == 48);
    CHECK(config.split.train_fraction == 0.7);
    CHECK(config.widths == std::vector<std::size_t>{64, 64, 64});
    CHECK(config.window == 3);
    CHECK(config.epochs == 600);
    CHECK(config.batch_size == 32);
    CHECK(config.mode == "stack");
    CHECK(config.sarima.p == 1);
    CHECK(config.sarima.D == 1);
    CHECK(config.sarima.season == 48);
}

TEST_CASE("a config file with comments parses") {
    const auto path = write_temp("kinn_cfg_ok.cfg",
                                 "# benchmark settings\n"
                                 "dataset.length = 2000\n"
                                 "network.widths = 8, 8\n"
                                 "network.epochs = 12  # short run\n"
                                 "kinn.mode = append\n"
                                 "\n");
    const RunConfig config = RunConfig::load(path);
    CHECK(config.synthetic.length == 2000);
    CHECK(config.widths == std::vector<std::size_t>{8, 8});
    CHECK(config.epochs == 12);
    CHECK(config.conditioning_mode() == ConditioningMode::AppendToSequence);
}

TEST_CASE("unknown keys are rejected before anything runs") {
    const auto path = write_temp("kinn_cfg_unknown.cfg", "dataset.lenght = 10\n");
    CHECK_THROWS_WITH_AS(RunConfig::load(path),
                         doctest::Contains("unknown config key"), ConfigError);
}

TEST_CASE("out-of-range values are rejected") {
    CHECK_THROWS_AS(RunConfig::load("", {"split.train=1.5"}), ConfigError);
    CHECK_THROWS_AS(RunConfig::load("", {"dataset.ar=1.0"}), ConfigError);
    CHECK_THROWS_AS(RunConfig::load("", {"network.widths=0"}), ConfigError);
    CHECK_THROWS_AS(RunConfig::load("", {"network.learning_rate=0"}), ConfigError);
    CHECK_THROWS_AS(RunConfig::load("", {"kinn.mode=sideways"}), ConfigError);
    CHECK_THROWS_AS(RunConfig::load("", {"network.epochs=abc"}), ConfigError);
    CHECK_THROWS_AS(
        RunConfig::load("", {"network.activations=sigmoid,tanh"}), ConfigError);
}

TEST_CASE("overrides beat file values") {
    const auto path = write_temp("kinn_cfg_base.cfg", "network.epochs = 100\n");
    const RunConfig config = RunConfig::load(path, {"network.epochs=7"});
    CHECK(config.epochs == 7);
}

TEST_CASE("a missing csv path fails at validation") {
    CHECK_THROWS_AS(RunConfig::load("", {"dataset.kind=csv",
                                         "dataset.csv_path=/no/such/file.csv"}),
                    ConfigError);
}

TEST_CASE("activation lists must match the widths") {
    CHECK_THROWS_AS(RunConfig::load("", {"network.widths=4,4",
                                         "network.activations=sigmoid"}),
                    ConfigError);
    const RunConfig ok = RunConfig::load(
        "", {"network.widths=4,4", "network.activations=relu,sigmoid"});
    CHECK(ok.network_config().activations ==
          std::vector<Activation>{Activation::Relu, Activation::Sigmoid});
}

TEST_CASE("derived views assemble the right settings") {
    const RunConfig config = RunConfig::load(
        "", {"network.widths=5,6", "network.seed=77", "network.epochs=9",
             "network.learning_rate=0.01", "expert.noise=gaussian"});
    const NetworkConfig net = config.network_config();
    CHECK(net.layer_widths == std::vector<std::size_t>{5, 6});
    CHECK(net.activations[0] == Activation::Sigmoid);
    CHECK(net.activations[1] == Activation::Relu);
    CHECK(net.seed == 77);

    const TrainOptions options = config.train_options();
    CHECK(options.epochs == 9);
    CHECK(options.learning_rate == 0.01);
    CHECK(options.seed == 77);

    const ExperimentConfigs configs = config.experiment_configs();
    CHECK(configs.noise_distribution == NoiseDistribution::Gaussian);
    CHECK(configs.window == 3);
}

TEST_CASE("the synthetic dataset loader is deterministic") {
    const RunConfig config = RunConfig::load("", {"dataset.length=300"});
    const TimeSeries a = config.load_dataset();
    const TimeSeries b = config.load_dataset();
    CHECK(a.values == b.values);
    CHECK(a.size() == 300);
}

TEST_CASE("csv datasets are aggregated into buckets") {
    std::string csv = "timestamp,value\n";
    for (int i = 0; i < 8; ++i)
        csv += std::to_string(1000 + 30 * i) + "," + std::to_string(i) + "\n";
    const auto path = write_temp("kinn_cfg_data.csv", csv);
    const RunConfig config =
        RunConfig::load("", {"dataset.kind=csv", "dataset.csv_path=" + path,
                             "dataset.bucket_seconds=60"});
    const TimeSeries ts = config.load_dataset();
    CHECK(ts.interval == 60);
    CHECK(ts.values == std::vector<double>{0.5, 2.5, 4.5, 6.5});
}
