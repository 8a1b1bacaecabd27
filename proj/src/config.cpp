#include "kinn/config.hpp"
#include "kinn/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace kinn {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": not a number: '" + value + "'");
    }
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw ConfigError(key + ": not an integer: '" + value + "'");
    return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw ConfigError(key + ": not a non-negative integer: '" + value + "'");
    return v;
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> items;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) items.push_back(trim(item));
    return items;
}

} // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    using Handler = std::function<void(RunConfig&, const std::string&)>;
    // One handler per documented key; anything else is rejected.
    static const std::map<std::string, Handler> handlers = {
        {"dataset.kind", [](RunConfig& c, const std::string& v) { c.dataset_kind = v; }},
        {"dataset.csv_path", [](RunConfig& c, const std::string& v) { c.csv_path = v; }},
        {"dataset.timestamp_column",
         [](RunConfig& c, const std::string& v) { c.timestamp_column = v; }},
        {"dataset.value_column",
         [](RunConfig& c, const std::string& v) { c.value_column = v; }},
        {"dataset.fill", [](RunConfig& c, const std::string& v) { c.fill = v; }},
        {"dataset.bucket_seconds",
         [](RunConfig& c, const std::string& v) {
             c.bucket_seconds = parse_int("dataset.bucket_seconds", v);
         }},
        {"dataset.length",
         [](RunConfig& c, const std::string& v) {
             c.synthetic.length = parse_uint("dataset.length", v);
         }},
        {"dataset.season",
         [](RunConfig& c, const std::string& v) {
             c.synthetic.season = parse_uint("dataset.season", v);
         }},
        {"dataset.amplitude",
         [](RunConfig& c, const std::string& v) {
             c.synthetic.amplitude = parse_double("dataset.amplitude", v);
         }},
        {"dataset.ar",
         [](RunConfig& c, const std::string& v) {
             c.synthetic.ar_coefficient = parse_double("dataset.ar", v);
         }},
        {"dataset.noise_std",
         [](RunConfig& c, const std::string& v) {
             c.synthetic.noise_std = parse_double("dataset.noise_std", v);
         }},
        {"dataset.peak_factor",
         [](RunConfig& c, const std::string& v) {
             c.synthetic.peak_variance_factor =
                 parse_double("dataset.peak_factor", v);
         }},
        {"dataset.seed",
         [](RunConfig& c, const std::string& v) {
             c.synthetic.seed = parse_uint("dataset.seed", v);
         }},
        {"split.train",
         [](RunConfig& c, const std::string& v) {
             c.split.train_fraction = parse_double("split.train", v);
         }},
        {"split.val",
         [](RunConfig& c, const std::string& v) {
             c.split.val_fraction = parse_double("split.val", v);
         }},
        {"split.test",
         [](RunConfig& c, const std::string& v) {
             c.split.test_fraction = parse_double("split.test", v);
         }},
        {"expert.kind", [](RunConfig& c, const std::string& v) { c.expert_kind = v; }},
        {"expert.p",
         [](RunConfig& c, const std::string& v) {
             c.sarima.p = static_cast<int>(parse_int("expert.p", v));
         }},
        {"expert.d",
         [](RunConfig& c, const std::string& v) {
             c.sarima.d = static_cast<int>(parse_int("expert.d", v));
         }},
        {"expert.q",
         [](RunConfig& c, const std::string& v) {
             c.sarima.q = static_cast<int>(parse_int("expert.q", v));
         }},
        {"expert.P",
         [](RunConfig& c, const std::string& v) {
             c.sarima.P = static_cast<int>(parse_int("expert.P", v));
         }},
        {"expert.D",
         [](RunConfig& c, const std::string& v) {
             c.sarima.D = static_cast<int>(parse_int("expert.D", v));
         }},
        {"expert.Q",
         [](RunConfig& c, const std::string& v) {
             c.sarima.Q = static_cast<int>(parse_int("expert.Q", v));
         }},
        {"expert.season",
         [](RunConfig& c, const std::string& v) {
             c.sarima.season = static_cast<int>(parse_int("expert.season", v));
         }},
        {"expert.max_iterations",
         [](RunConfig& c, const std::string& v) {
             c.sarima_fit.max_iterations = parse_uint("expert.max_iterations", v);
         }},
        {"expert.tolerance",
         [](RunConfig& c, const std::string& v) {
             c.sarima_fit.tolerance = parse_double("expert.tolerance", v);
         }},
        {"expert.noise", [](RunConfig& c, const std::string& v) { c.noise = v; }},
        {"expert.noise_seed",
         [](RunConfig& c, const std::string& v) {
             c.noise_seed = parse_uint("expert.noise_seed", v);
         }},
        {"network.widths",
         [](RunConfig& c, const std::string& v) {
             c.widths.clear();
             for (const auto& item : split_list(v))
                 c.widths.push_back(parse_uint("network.widths", item));
         }},
        {"network.activations",
         [](RunConfig& c, const std::string& v) {
             c.activations.clear();
             for (const auto& item : split_list(v)) {
                 if (item == "sigmoid")
                     c.activations.push_back(Activation::Sigmoid);
                 else if (item == "relu")
                     c.activations.push_back(Activation::Relu);
                 else
                     throw ConfigError(
                         "network.activations: unknown activation '" + item +
                         "' (expected sigmoid or relu)");
             }
         }},
        {"network.window",
         [](RunConfig& c, const std::string& v) {
             c.window = parse_uint("network.window", v);
         }},
        {"network.epochs",
         [](RunConfig& c, const std::string& v) {
             c.epochs = parse_uint("network.epochs", v);
         }},
        {"network.batch_size",
         [](RunConfig& c, const std::string& v) {
             c.batch_size = parse_uint("network.batch_size", v);
         }},
        {"network.learning_rate",
         [](RunConfig& c, const std::string& v) {
             c.learning_rate = parse_double("network.learning_rate", v);
         }},
        {"network.seed",
         [](RunConfig& c, const std::string& v) {
             c.network_seed = parse_uint("network.seed", v);
         }},
        {"kinn.mode", [](RunConfig& c, const std::string& v) { c.mode = v; }},
        {"experiment.near_tie_threshold",
         [](RunConfig& c, const std::string& v) {
             c.near_tie_threshold =
                 parse_double("experiment.near_tie_threshold", v);
         }},
    };

    const auto it = handlers.find(key);
    if (it == handlers.end()) throw ConfigError("unknown config key: " + key);
    it->second(*this, value);
}

RunConfig RunConfig::load(const std::string& path,
                          const std::vector<std::string>& overrides) {
    RunConfig config;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(path + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
            config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }
    for (const auto& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override must be key=value: " + item);
        config.set(trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
    }
    config.validate();
    return config;
}

void RunConfig::validate() const {
    if (dataset_kind != "synthetic" && dataset_kind != "csv")
        throw ConfigError("dataset.kind must be synthetic or csv");
    if (dataset_kind == "csv") {
        if (csv_path.empty()) throw ConfigError("dataset.csv_path is required");
        std::ifstream probe(csv_path);
        if (!probe)
            throw ConfigError("dataset.csv_path does not exist: " + csv_path);
    }
    if (fill != "none" && fill != "forward")
        throw ConfigError("dataset.fill must be none or forward");
    if (bucket_seconds <= 0) throw ConfigError("dataset.bucket_seconds must be > 0");
    if (synthetic.length == 0) throw ConfigError("dataset.length must be > 0");
    if (synthetic.season == 0) throw ConfigError("dataset.season must be > 0");
    if (std::abs(synthetic.ar_coefficient) >= 1.0)
        throw ConfigError("dataset.ar must lie in (-1,1)");
    if (synthetic.noise_std < 0) throw ConfigError("dataset.noise_std must be >= 0");
    split.validate();
    if (expert_kind != "sarima" && expert_kind != "seasonal-naive")
        throw ConfigError("expert.kind must be sarima or seasonal-naive");
    if (noise != "uniform" && noise != "gaussian")
        throw ConfigError("expert.noise must be uniform or gaussian");
    if (sarima.p < 0 || sarima.d < 0 || sarima.q < 0 || sarima.P < 0 ||
        sarima.D < 0 || sarima.Q < 0)
        throw ConfigError("SARIMA orders must be non-negative");
    if ((sarima.P > 0 || sarima.D > 0 || sarima.Q > 0) && sarima.season < 2)
        throw ConfigError("expert.season must be >= 2 with seasonal orders");
    if (sarima_fit.tolerance <= 0) throw ConfigError("expert.tolerance must be > 0");
    if (widths.empty()) throw ConfigError("network.widths must not be empty");
    for (std::size_t w : widths)
        if (w == 0) throw ConfigError("network.widths entries must be > 0");
    if (!activations.empty() && activations.size() != widths.size())
        throw ConfigError("network.activations must match network.widths");
    if (window == 0) throw ConfigError("network.window must be > 0");
    if (batch_size == 0) throw ConfigError("network.batch_size must be > 0");
    if (!(learning_rate > 0))
        throw ConfigError("network.learning_rate must be > 0");
    if (mode != "stack" && mode != "append")
        throw ConfigError("kinn.mode must be stack or append");
    if (near_tie_threshold <= 0)
        throw ConfigError("experiment.near_tie_threshold must be > 0");
}

NetworkConfig RunConfig::network_config() const {
    NetworkConfig config;
    config.input_channels = 1;
    config.layer_widths = widths;
    config.activations = activations.empty()
                             ? NetworkConfig::default_activations(widths.size())
                             : activations;
    config.seed = network_seed;
    return config;
}

TrainOptions RunConfig::train_options() const {
    TrainOptions options;
    options.epochs = epochs;
    options.batch_size = batch_size;
    options.learning_rate = learning_rate;
    options.seed = network_seed;
    return options;
}

NoiseDistribution RunConfig::noise_distribution() const {
    return noise == "gaussian" ? NoiseDistribution::Gaussian
                               : NoiseDistribution::Uniform;
}

ConditioningMode RunConfig::conditioning_mode() const {
    return conditioning_mode_from_string(mode);
}

ExperimentConfigs RunConfig::experiment_configs() const {
    ExperimentConfigs configs;
    configs.window = window;
    configs.split = split;
    configs.use_seasonal_naive = expert_kind == "seasonal-naive";
    configs.sarima = sarima;
    configs.sarima_fit = sarima_fit;
    configs.noise_distribution = noise_distribution();
    configs.noise_seed = noise_seed;
    configs.network = network_config();
    configs.train_options = train_options();
    configs.mode = conditioning_mode();
    configs.near_tie_threshold = near_tie_threshold;
    return configs;
}

TimeSeries RunConfig::load_dataset() const {
    if (dataset_kind == "synthetic") return generate_synthetic(synthetic);
    CsvColumnSpec columns;
    columns.timestamp_column = timestamp_column;
    columns.value_column = value_column;
    columns.fill_forward = fill == "forward";
    TimeSeries raw = load_csv(csv_path, columns);
    if (bucket_seconds == raw.interval) return raw;
    return aggregate(raw, bucket_seconds);
}

} // namespace kinn
