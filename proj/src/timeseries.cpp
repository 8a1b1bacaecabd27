#include "kinn/timeseries.hpp"
#include "kinn/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace kinn {

// ---------------------------------------------------------------------------
// Timestamps
// ---------------------------------------------------------------------------

namespace {

// Civil-calendar conversion (Howard Hinnant's algorithm), UTC only.
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2u) / 5u + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

} // namespace

std::string format_iso8601(std::int64_t epoch_seconds) {
    std::int64_t days = epoch_seconds / 86400;
    std::int64_t sod = epoch_seconds % 86400;
    if (sod < 0) {
        sod += 86400;
        days -= 1;
    }
    int y, m, d;
    civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", y, m, d,
                  static_cast<int>(sod / 3600), static_cast<int>(sod / 60 % 60),
                  static_cast<int>(sod % 60));
    return buf;
}

std::optional<std::int64_t> parse_timestamp(const std::string& text) {
    const std::string s = trim(text);
    if (s.empty()) return std::nullopt;

    // ISO-8601 date or datetime, 'T' or space separated, optional 'Z'.
    if (s.size() >= 10 && s[4] == '-' && s[7] == '-') {
        int y, mo, d, h = 0, mi = 0, se = 0;
        char sep = 0;
        int n = std::sscanf(s.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d", &y, &mo, &d,
                            &sep, &h, &mi, &se);
        if (n == 3 && s.size() == 10) {
            // date only
        } else if (n >= 6 && (sep == 'T' || sep == ' ')) {
            // valid datetime (seconds optional)
        } else {
            return std::nullopt;
        }
        if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || se > 60)
            return std::nullopt;
        return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se;
    }

    // Bare integer epoch seconds.
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size()) return v;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

} // namespace

TimeSeries load_csv(const std::string& path, const CsvColumnSpec& spec) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw IoError("empty CSV file: " + path);

    const auto header = split_csv_line(line);
    std::size_t ts_col = header.size(), val_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name = trim(header[i]);
        if (name == spec.timestamp_column) ts_col = i;
        if (name == spec.value_column) val_col = i;
    }
    if (ts_col == header.size())
        throw ConfigError("timestamp column '" + spec.timestamp_column +
                          "' not found in " + path);
    if (val_col == header.size())
        throw ConfigError("value column '" + spec.value_column +
                          "' not found in " + path);

    std::vector<std::int64_t> times;
    std::vector<double> values;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() <= std::max(ts_col, val_col))
            throw IoError("row " + std::to_string(row) + ": too few columns");
        const auto t = parse_timestamp(fields[ts_col]);
        if (!t)
            throw IoError("row " + std::to_string(row) +
                          ": unparseable timestamp '" + fields[ts_col] + "'");
        double v = 0.0;
        try {
            std::size_t pos = 0;
            const std::string f = trim(fields[val_col]);
            v = std::stod(f, &pos);
            if (pos != f.size()) throw std::invalid_argument(f);
        } catch (const std::exception&) {
            throw IoError("row " + std::to_string(row) +
                          ": unparseable value '" + fields[val_col] + "'");
        }
        times.push_back(*t);
        values.push_back(v);
    }

    if (values.empty()) throw IoError("CSV has no data rows: " + path);
    if (values.size() == 1) return TimeSeries{times[0], 1, values};

    const std::int64_t interval = times[1] - times[0];
    if (interval <= 0)
        throw ComputeError("row 3: timestamps not strictly increasing");

    TimeSeries ts;
    ts.start_time = times[0];
    ts.interval = interval;
    ts.values.push_back(values[0]);
    for (std::size_t i = 1; i < times.size(); ++i) {
        const std::int64_t delta = times[i] - times[i - 1];
        if (delta <= 0)
            throw ComputeError("row " + std::to_string(i + 2) +
                               ": timestamps not strictly increasing");
        if (delta != interval) {
            if (delta % interval != 0 || !spec.fill_forward)
                throw ComputeError("row " + std::to_string(i + 2) +
                                   ": gap of " + std::to_string(delta) +
                                   " s in " + std::to_string(interval) +
                                   " s data");
            for (std::int64_t k = 1; k < delta / interval; ++k)
                ts.values.push_back(values[i - 1]);
        }
        ts.values.push_back(values[i]);
    }
    return ts;
}

void save_csv(const TimeSeries& ts, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write CSV file: " + path);
    out << "timestamp,value\n";
    char buf[40];
    for (std::size_t i = 0; i < ts.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", ts.values[i]);
        out << format_iso8601(ts.time_at(i)) << ',' << buf << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Transformations
// ---------------------------------------------------------------------------

void SplitSpec::validate() const {
    if (train_fraction <= 0 || train_fraction >= 1 || val_fraction <= 0 ||
        val_fraction >= 1 || test_fraction <= 0 || test_fraction >= 1)
        throw ConfigError("split fractions must lie in (0,1)");
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
        throw ConfigError("split fractions must sum to 1");
}

TimeSeries aggregate(const TimeSeries& ts, std::int64_t bucket_seconds) {
    if (ts.interval <= 0) throw ConfigError("series interval must be positive");
    if (bucket_seconds <= 0 || bucket_seconds % ts.interval != 0)
        throw ConfigError("bucket (" + std::to_string(bucket_seconds) +
                          " s) is not a multiple of the series interval (" +
                          std::to_string(ts.interval) + " s)");
    const std::size_t per = static_cast<std::size_t>(bucket_seconds / ts.interval);
    TimeSeries out;
    out.start_time = ts.start_time;
    out.interval = bucket_seconds;
    const std::size_t buckets = ts.size() / per;
    out.values.reserve(buckets);
    for (std::size_t b = 0; b < buckets; ++b) {
        double sum = 0.0;
        for (std::size_t j = 0; j < per; ++j) sum += ts.values[b * per + j];
        out.values.push_back(sum / static_cast<double>(per));
    }
    return out;
}

SplitResult split(const TimeSeries& ts, const SplitSpec& spec) {
    spec.validate();
    const std::size_t n = ts.size();
    const auto n_train = static_cast<std::size_t>(
        std::floor(spec.train_fraction * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(
        std::floor(spec.val_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n)
        throw ConfigError("series of length " + std::to_string(n) +
                          " leaves an empty split");

    auto slice = [&](std::size_t begin, std::size_t end) {
        TimeSeries part;
        part.start_time = ts.time_at(begin);
        part.interval = ts.interval;
        part.values.assign(ts.values.begin() + static_cast<std::ptrdiff_t>(begin),
                           ts.values.begin() + static_cast<std::ptrdiff_t>(end));
        return part;
    };
    return SplitResult{slice(0, n_train), slice(n_train, n_train + n_val),
                       slice(n_train + n_val, n)};
}

ScalerParams fit_scaler(const TimeSeries& train) {
    const std::size_t n = train.size();
    if (n < 2) throw ConfigError("scaler needs at least two observations");
    const double mean =
        std::accumulate(train.values.begin(), train.values.end(), 0.0) /
        static_cast<double>(n);
    double ss = 0.0;
    for (double v : train.values) ss += (v - mean) * (v - mean);
    const double var = ss / static_cast<double>(n);
    if (var <= 0.0)
        throw ComputeError("train split has zero variance; cannot standardize");
    return ScalerParams{mean, std::sqrt(var)};
}

double transform_value(double x, const ScalerParams& s) {
    return (x - s.mean) / s.std;
}

double inverse_transform_value(double z, const ScalerParams& s) {
    return z * s.std + s.mean;
}

TimeSeries transform(const TimeSeries& ts, const ScalerParams& s) {
    TimeSeries out = ts;
    for (double& v : out.values) v = transform_value(v, s);
    return out;
}

TimeSeries inverse_transform(const TimeSeries& ts, const ScalerParams& s) {
    TimeSeries out = ts;
    for (double& v : out.values) v = inverse_transform_value(v, s);
    return out;
}

WindowedDataset make_windows(const TimeSeries& ts, std::size_t p,
                             const std::vector<double>* expert_preds,
                             ChannelLayout layout) {
    if (p == 0) throw ConfigError("window size must be positive");
    if (ts.size() < p + 1)
        throw ConfigError("series of length " + std::to_string(ts.size()) +
                          " too short for window size " + std::to_string(p));
    const std::size_t n_rows = ts.size() - p;
    const bool with_expert = layout == ChannelLayout::ValuesPlusExpert;
    if (with_expert) {
        if (expert_preds == nullptr)
            throw ConfigError("ValuesPlusExpert layout needs expert predictions");
        if (expert_preds->size() != n_rows)
            throw ConfigError("expert predictions misaligned: got " +
                              std::to_string(expert_preds->size()) +
                              ", need one per target (" +
                              std::to_string(n_rows) + ")");
    }

    WindowedDataset ds;
    ds.rows = n_rows;
    ds.steps = p;
    ds.channels = with_expert ? 2 : 1;
    ds.layout = layout;
    ds.inputs.resize(n_rows * p * ds.channels);
    ds.targets.resize(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) {
        for (std::size_t t = 0; t < p; ++t) {
            ds.at(i, t, 0) = ts.values[i + t];
            if (with_expert) ds.at(i, t, 1) = (*expert_preds)[i];
        }
        ds.targets[i] = ts.values[i + p];
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

std::vector<double> acf(const std::vector<double>& values, std::size_t max_lag) {
    const std::size_t n = values.size();
    if (n < 2) throw ConfigError("series too short for autocorrelation");
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                        static_cast<double>(n);
    double c0 = 0.0;
    for (double v : values) c0 += (v - mean) * (v - mean);
    if (c0 <= 0.0) throw ComputeError("zero-variance series");

    std::vector<double> r(max_lag + 1, 0.0);
    r[0] = 1.0;
    for (std::size_t k = 1; k <= max_lag && k < n; ++k) {
        double ck = 0.0;
        for (std::size_t t = k; t < n; ++t)
            ck += (values[t] - mean) * (values[t - k] - mean);
        r[k] = ck / c0;
    }
    return r;
}

std::vector<double> pacf(const TimeSeries& ts, std::size_t max_lag) {
    if (max_lag == 0) throw ConfigError("max_lag must be positive");
    if (ts.size() <= max_lag + 1)
        throw ConfigError("series too short for PACF to lag " +
                          std::to_string(max_lag));
    const auto r = acf(ts.values, max_lag);

    std::vector<double> out(max_lag + 1, 0.0);
    out[0] = 1.0;

    // Durbin-Levinson: phi holds the AR(k) coefficients at the current order.
    std::vector<double> phi(max_lag + 1, 0.0), prev(max_lag + 1, 0.0);
    phi[1] = r[1];
    out[1] = r[1];
    double err = 1.0 - r[1] * r[1];
    for (std::size_t k = 2; k <= max_lag; ++k) {
        prev = phi;
        double num = r[k];
        for (std::size_t j = 1; j < k; ++j) num -= prev[j] * r[k - j];
        if (err <= 0.0) throw ComputeError("degenerate autocorrelation matrix");
        const double reflect = num / err;
        phi[k] = reflect;
        for (std::size_t j = 1; j < k; ++j)
            phi[j] = prev[j] - reflect * prev[k - j];
        err *= (1.0 - reflect * reflect);
        out[k] = reflect;
    }
    return out;
}

} // namespace kinn
