#ifndef KINN_TIMESERIES_HPP
#define KINN_TIMESERIES_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kinn {

/**
 * A regularly sampled scalar series. `start_time` is UTC seconds since the
 * epoch, `interval` the fixed spacing in seconds. Gaps are never stored;
 * ingestion either rejects them or forward-fills.
 */
struct TimeSeries {
    std::int64_t start_time = 0;
    std::int64_t interval = 1;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    std::int64_t time_at(std::size_t i) const {
        return start_time + static_cast<std::int64_t>(i) * interval;
    }
};

/// Chronological train/validation/test fractions. Must sum to 1.
struct SplitSpec {
    double train_fraction = 0.7;
    double val_fraction = 0.1;
    double test_fraction = 0.2;

    void validate() const;
};

struct SplitResult {
    TimeSeries train;
    TimeSeries val;
    TimeSeries test;
};

/// z-score parameters, always estimated from the train split only.
struct ScalerParams {
    double mean = 0.0;
    double std = 1.0;
};

enum class ChannelLayout { ValuesOnly, ValuesPlusExpert };

/**
 * Sliding windows over a series: `rows` windows of `steps` time-steps with
 * `channels` features each, plus one target per window. Window rows are
 * chronological (oldest value first); targets[i] is the value following
 * window i.
 */
struct WindowedDataset {
    std::size_t rows = 0;
    std::size_t steps = 0;
    std::size_t channels = 1;
    ChannelLayout layout = ChannelLayout::ValuesOnly;
    std::vector<double> inputs;  // rows * steps * channels, row-major
    std::vector<double> targets; // rows

    double& at(std::size_t row, std::size_t step, std::size_t channel) {
        return inputs[(row * steps + step) * channels + channel];
    }
    double at(std::size_t row, std::size_t step, std::size_t channel) const {
        return inputs[(row * steps + step) * channels + channel];
    }
};

// ---------------------------------------------------------------------------
// Ingestion and export
// ---------------------------------------------------------------------------

struct CsvColumnSpec {
    std::string timestamp_column = "timestamp";
    std::string value_column = "value";
    /// Forward-fill interior gaps instead of rejecting them.
    bool fill_forward = false;
};

/**
 * Load a two-column CSV (header required, UTF-8, '.' decimal point).
 * Timestamps may be ISO-8601 ("2016-01-05 08:30:00" or with 'T') or raw
 * epoch seconds. Rows must be strictly increasing at a constant interval;
 * violations raise IoError/ComputeError naming the offending row.
 */
TimeSeries load_csv(const std::string& path, const CsvColumnSpec& spec = {});

/// Write "timestamp,value" rows with ISO-8601 timestamps.
void save_csv(const TimeSeries& ts, const std::string& path);

/// 1970-01-01T00:00:00 based ISO-8601 rendering/parsing (UTC, seconds).
std::string format_iso8601(std::int64_t epoch_seconds);
std::optional<std::int64_t> parse_timestamp(const std::string& text);

// ---------------------------------------------------------------------------
// Transformations
// ---------------------------------------------------------------------------

/**
 * Mean-aggregate into buckets of `bucket_seconds` (an integer multiple of
 * the input interval). A trailing partial bucket is dropped.
 */
TimeSeries aggregate(const TimeSeries& ts, std::int64_t bucket_seconds);

/**
 * Chronological split. Train and validation sizes round down, the test
 * split takes the remainder. Any empty split is an error.
 */
SplitResult split(const TimeSeries& ts, const SplitSpec& spec);

/// Population mean/std from the train split. std == 0 is an error.
ScalerParams fit_scaler(const TimeSeries& train);

TimeSeries transform(const TimeSeries& ts, const ScalerParams& scaler);
TimeSeries inverse_transform(const TimeSeries& ts, const ScalerParams& scaler);

double transform_value(double x, const ScalerParams& scaler);
double inverse_transform_value(double z, const ScalerParams& scaler);

/**
 * Build windows of length p. Row i holds values[i..i+p), target values[i+p].
 * With ValuesPlusExpert, `expert_preds` must hold one prediction per target
 * and fills channel 1 with that prediction at every step of the window.
 */
WindowedDataset make_windows(const TimeSeries& ts, std::size_t p,
                             const std::vector<double>* expert_preds = nullptr,
                             ChannelLayout layout = ChannelLayout::ValuesOnly);

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Sample autocorrelations r_0..r_max_lag (biased normalization).
std::vector<double> acf(const std::vector<double>& values, std::size_t max_lag);

/**
 * Partial autocorrelation at lags 0..max_lag via the Durbin-Levinson
 * recursion on sample autocorrelations. pacf[0] is exactly 1.
 */
std::vector<double> pacf(const TimeSeries& ts, std::size_t max_lag);

} // namespace kinn

#endif // KINN_TIMESERIES_HPP
