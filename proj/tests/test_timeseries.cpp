#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kinn/errors.hpp"
#include "kinn/expert.hpp"
#include "kinn/rng.hpp"
#include "kinn/timeseries.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

using namespace kinn;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const auto path = (fs::temp_directory_path() / name).string();
    std::ofstream out(path);
    out << content;
    return path;
}

TimeSeries series_of(std::vector<double> values, std::int64_t interval = 30) {
    TimeSeries ts;
    ts.start_time = 0;
    ts.interval = interval;
    ts.values = std::move(values);
    return ts;
}

// Reference PACF: for each lag k, solve the order-k autoregression normal
// equations (Toeplitz in the sample autocorrelations) with a dense
// partial-pivot solve and take the last coefficient. Shares no code with
// the Durbin-Levinson path it checks.
std::vector<double> reference_pacf(const std::vector<double>& x,
                                   std::size_t max_lag) {
    const std::size_t n = x.size();
    const double mean =
        std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    std::vector<double> r(max_lag + 1, 0.0);
    double c0 = 0.0;
    for (double v : x) c0 += (v - mean) * (v - mean);
    for (std::size_t k = 0; k <= max_lag; ++k) {
        double ck = 0.0;
        for (std::size_t t = k; t < n; ++t)
            ck += (x[t] - mean) * (x[t - k] - mean);
        r[k] = ck / c0;
    }

    std::vector<double> out(max_lag + 1, 0.0);
    out[0] = 1.0;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        // Solve R phi = rho, R[i][j] = r[|i-j|], rho[i] = r[i+1].
        std::vector<std::vector<double>> a(k, std::vector<double>(k + 1));
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j)
                a[i][j] = r[i > j ? i - j : j - i];
            a[i][k] = r[i + 1];
        }
        for (std::size_t col = 0; col < k; ++col) {
            std::size_t pivot = col;
            for (std::size_t row = col + 1; row < k; ++row)
                if (std::abs(a[row][col]) > std::abs(a[pivot][col])) pivot = row;
            std::swap(a[col], a[pivot]);
            for (std::size_t row = col + 1; row < k; ++row) {
                const double f = a[row][col] / a[col][col];
                for (std::size_t j = col; j <= k; ++j) a[row][j] -= f * a[col][j];
            }
        }
        std::vector<double> phi(k);
        for (std::size_t i = k; i-- > 0;) {
            double v = a[i][k];
            for (std::size_t j = i + 1; j < k; ++j) v -= a[i][j] * phi[j];
            phi[i] = v / a[i][i];
        }
        out[k] = phi[k - 1];
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// load_csv
// ---------------------------------------------------------------------------

TEST_CASE("load_csv parses a regular series") {
    const auto path = write_temp("kinn_csv_ok.csv",
                                 "timestamp,value\n"
                                 "2016-01-01T00:00:00,1\n"
                                 "2016-01-01T00:00:30,2\n"
                                 "2016-01-01T00:01:00,3\n");
    const TimeSeries ts = load_csv(path);
    CHECK(ts.interval == 30);
    CHECK(ts.values == std::vector<double>{1, 2, 3});
    CHECK(format_iso8601(ts.start_time) == "2016-01-01T00:00:00");
}

TEST_CASE("load_csv rejects a gap and reports the row") {
    const auto path = write_temp("kinn_csv_gap.csv",
                                 "timestamp,value\n"
                                 "2016-01-01T00:00:00,1\n"
                                 "2016-01-01T00:00:30,2\n"
                                 "2016-01-01T00:01:30,3\n");
    CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("row 4"),
                         ComputeError);
}

TEST_CASE("load_csv forward-fills a gap when asked") {
    const auto path = write_temp("kinn_csv_fill.csv",
                                 "timestamp,value\n"
                                 "2016-01-01T00:00:00,1\n"
                                 "2016-01-01T00:00:30,2\n"
                                 "2016-01-01T00:01:30,4\n");
    CsvColumnSpec spec;
    spec.fill_forward = true;
    const TimeSeries ts = load_csv(path, spec);
    CHECK(ts.values == std::vector<double>{1, 2, 2, 4});
}

TEST_CASE("load_csv rejects empty and malformed input") {
    CHECK_THROWS_AS(load_csv(write_temp("kinn_csv_empty.csv", "")), IoError);
    CHECK_THROWS_AS(
        load_csv(write_temp("kinn_csv_headeronly.csv", "timestamp,value\n")),
        IoError);
    const auto bad = write_temp("kinn_csv_bad.csv",
                                "timestamp,value\n"
                                "2016-01-01T00:00:00,1\n"
                                "2016-01-01T00:00:30,oops\n");
    CHECK_THROWS_WITH_AS(load_csv(bad), doctest::Contains("row 3"), IoError);
}

TEST_CASE("load_csv honours custom column names") {
    const auto path = write_temp("kinn_csv_cols.csv",
                                 "flow,when\n"
                                 "5,1000\n"
                                 "6,1030\n");
    CsvColumnSpec spec;
    spec.timestamp_column = "when";
    spec.value_column = "flow";
    const TimeSeries ts = load_csv(path, spec);
    CHECK(ts.start_time == 1000);
    CHECK(ts.values == std::vector<double>{5, 6});
}

TEST_CASE("csv round trip") {
    TimeSeries ts = series_of({1.5, 2.25, 3.125}, 1800);
    ts.start_time = 1451606400;
    const auto path = (fs::temp_directory_path() / "kinn_csv_rt.csv").string();
    save_csv(ts, path);
    const TimeSeries back = load_csv(path);
    CHECK(back.start_time == ts.start_time);
    CHECK(back.interval == ts.interval);
    CHECK(back.values == ts.values);
}

// ---------------------------------------------------------------------------
// aggregate
// ---------------------------------------------------------------------------

TEST_CASE("aggregate means each bucket") {
    const TimeSeries out = aggregate(series_of({1, 2, 3, 4}), 60);
    CHECK(out.interval == 60);
    CHECK(out.values == std::vector<double>{1.5, 3.5});
}

TEST_CASE("aggregate keeps a constant series constant") {
    const TimeSeries out = aggregate(series_of({7, 7, 7, 7, 7, 7}), 90);
    CHECK(out.values == std::vector<double>{7, 7});
}

TEST_CASE("aggregate drops the trailing partial bucket") {
    const TimeSeries out = aggregate(series_of({1, 2, 3, 4, 5}), 60);
    CHECK(out.values.size() == 2);
}

TEST_CASE("aggregate rejects a non-multiple bucket") {
    CHECK_THROWS_AS(aggregate(series_of({1, 2, 3}), 45), ConfigError);
}

TEST_CASE("aggregate preserves total mass up to truncation") {
    Rng rng(11);
    std::vector<double> values(257);
    for (double& v : values) v = rng.next_uniform(0, 50);
    const TimeSeries ts = series_of(values);
    const TimeSeries out = aggregate(ts, 4 * 30);
    double bucket_mass = 0.0;
    for (double v : out.values) bucket_mass += v * 4;
    double raw_mass = 0.0;
    for (std::size_t i = 0; i < out.values.size() * 4; ++i)
        raw_mass += values[i];
    CHECK(bucket_mass == doctest::Approx(raw_mass).epsilon(1e-9));
}

// ---------------------------------------------------------------------------
// split
// ---------------------------------------------------------------------------

TEST_CASE("split uses floor/floor/remainder") {
    TimeSeries ts = series_of(std::vector<double>(100, 0.0));
    std::iota(ts.values.begin(), ts.values.end(), 0.0);
    const SplitResult parts = split(ts, SplitSpec{});
    CHECK(parts.train.size() == 70);
    CHECK(parts.val.size() == 10);
    CHECK(parts.test.size() == 20);

    ts.values.push_back(101);
    const SplitResult parts2 = split(ts, SplitSpec{});
    CHECK(parts2.train.size() == 70);
    CHECK(parts2.val.size() == 10);
    CHECK(parts2.test.size() == 21);
}

TEST_CASE("split concatenation reproduces the input") {
    TimeSeries ts = series_of(std::vector<double>(53, 0.0));
    std::iota(ts.values.begin(), ts.values.end(), 1.0);
    const SplitResult parts = split(ts, SplitSpec{});
    std::vector<double> cat = parts.train.values;
    cat.insert(cat.end(), parts.val.values.begin(), parts.val.values.end());
    cat.insert(cat.end(), parts.test.values.begin(), parts.test.values.end());
    CHECK(cat == ts.values);
    CHECK(parts.val.start_time == parts.train.time_at(parts.train.size()));
}

TEST_CASE("split rejects an empty part") {
    CHECK_THROWS_AS(split(series_of({1, 2, 3}), SplitSpec{}), ConfigError);
}

TEST_CASE("split validates fractions") {
    CHECK_THROWS_AS(split(series_of(std::vector<double>(100, 1.0)),
                          SplitSpec{0.5, 0.2, 0.2}),
                    ConfigError);
}

// ---------------------------------------------------------------------------
// scaler
// ---------------------------------------------------------------------------

TEST_CASE("scaler matches hand arithmetic") {
    const ScalerParams s = fit_scaler(series_of({0, 2}));
    CHECK(s.mean == doctest::Approx(1.0));
    CHECK(s.std == doctest::Approx(1.0));
    const TimeSeries scaled = transform(series_of({1}), s);
    CHECK(scaled.values[0] == doctest::Approx(0.0));
}

TEST_CASE("scaler rejects constant input") {
    CHECK_THROWS_AS(fit_scaler(series_of({3, 3, 3})), ComputeError);
    CHECK_THROWS_AS(fit_scaler(series_of({3})), ConfigError);
}

TEST_CASE("scaler round trip is the identity") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> values(64);
        for (double& v : values) v = rng.next_uniform(-100, 100);
        const TimeSeries ts = series_of(values);
        const ScalerParams s = fit_scaler(ts);
        const TimeSeries back = inverse_transform(transform(ts, s), s);
        for (std::size_t i = 0; i < values.size(); ++i)
            CHECK(back.values[i] == doctest::Approx(values[i]).epsilon(1e-10));

        const TimeSeries scaled = transform(ts, s);
        double mean = std::accumulate(scaled.values.begin(),
                                      scaled.values.end(), 0.0) /
                      64.0;
        CHECK(std::abs(mean) < 1e-12);
    }
}

// ---------------------------------------------------------------------------
// make_windows
// ---------------------------------------------------------------------------

TEST_CASE("make_windows builds chronological windows") {
    const WindowedDataset ds = make_windows(series_of({1, 2, 3, 4}), 3);
    CHECK(ds.rows == 1);
    CHECK(ds.steps == 3);
    CHECK(ds.channels == 1);
    CHECK(ds.at(0, 0, 0) == 1);
    CHECK(ds.at(0, 1, 0) == 2);
    CHECK(ds.at(0, 2, 0) == 3);
    CHECK(ds.targets[0] == 4);
}

TEST_CASE("make_windows repeats the expert prediction per step") {
    const std::vector<double> preds{3.9};
    const WindowedDataset ds = make_windows(series_of({1, 2, 3, 4}), 3, &preds,
                                            ChannelLayout::ValuesPlusExpert);
    CHECK(ds.channels == 2);
    for (std::size_t t = 0; t < 3; ++t) CHECK(ds.at(0, t, 1) == 3.9);
}

TEST_CASE("make_windows rejects short series and misalignment") {
    CHECK_THROWS_AS(make_windows(series_of({1, 2, 3}), 3), ConfigError);
    const std::vector<double> preds{1.0, 2.0};
    CHECK_THROWS_AS(make_windows(series_of({1, 2, 3, 4}), 3, &preds,
                                 ChannelLayout::ValuesPlusExpert),
                    ConfigError);
}

TEST_CASE("windowing round trip reconstructs the series") {
    Rng rng(5);
    std::vector<double> values(41);
    for (double& v : values) v = rng.next_uniform(-5, 5);
    const std::size_t p = 4;
    const WindowedDataset ds = make_windows(series_of(values), p);

    std::vector<double> rebuilt;
    for (std::size_t i = 0; i < ds.rows; ++i) rebuilt.push_back(ds.at(i, 0, 0));
    for (std::size_t t = 1; t < p; ++t)
        rebuilt.push_back(ds.at(ds.rows - 1, t, 0));
    rebuilt.push_back(ds.targets.back());
    CHECK(rebuilt == values);

    // Every target matches the source series.
    for (std::size_t i = 0; i < ds.rows; ++i)
        CHECK(ds.targets[i] == values[i + p]);
}

// ---------------------------------------------------------------------------
// pacf
// ---------------------------------------------------------------------------

TEST_CASE("pacf lag zero is exactly one") {
    const auto v = pacf(series_of({1, 3, 2, 5, 4, 6, 5, 8}), 3);
    CHECK(v[0] == 1.0);
}

TEST_CASE("pacf of a seeded AR(1) shows one dominant lag") {
    ArmaSimSpec spec;
    spec.ar = {0.8};
    spec.length = 5000;
    spec.seed = 314;
    const TimeSeries ts = simulate_arma(spec);
    const auto v = pacf(ts, 10);
    CHECK(v[1] > 0.75);
    CHECK(v[1] < 0.85);
    const double band = 2.0 / std::sqrt(5000.0);
    for (std::size_t k = 2; k <= 10; ++k) CHECK(std::abs(v[k]) < band);
}

TEST_CASE("pacf of seeded white noise stays inside the band") {
    ArmaSimSpec spec;
    spec.length = 5000;
    spec.seed = 2718;
    const TimeSeries ts = simulate_arma(spec);
    const auto v = pacf(ts, 12);
    const double band = 3.0 / std::sqrt(5000.0);
    for (std::size_t k = 1; k <= 12; ++k) CHECK(std::abs(v[k]) < band);
}

TEST_CASE("pacf matches the dense autoregression solve") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 30 + rng.next_index(171); // up to 200
        std::vector<double> values(n);
        double prev = 0.0;
        const double phi = rng.next_uniform(-0.9, 0.9);
        for (double& v : values) {
            prev = phi * prev + rng.next_gaussian();
            v = prev;
        }
        const std::size_t max_lag = 1 + rng.next_index(8);
        const auto fast = pacf(series_of(values), max_lag);
        const auto slow = reference_pacf(values, max_lag);
        REQUIRE(fast.size() == slow.size());
        for (std::size_t k = 0; k <= max_lag; ++k)
            CHECK(fast[k] == doctest::Approx(slow[k]).epsilon(1e-6));
    }
}

TEST_CASE("pacf rejects degenerate input") {
    CHECK_THROWS_AS(pacf(series_of({1, 2}), 5), ConfigError);
    CHECK_THROWS_AS(pacf(series_of({2, 2, 2, 2, 2, 2}), 2), ComputeError);
}
