#include "kinn/expert.hpp"
#include "kinn/errors.hpp"
#include "kinn/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace kinn {

// ---------------------------------------------------------------------------
// Differencing and polynomial helpers
// ---------------------------------------------------------------------------

namespace {

std::vector<double> difference(std::vector<double> v, int d, int D, int season) {
    for (int i = 0; i < d; ++i) {
        for (std::size_t t = v.size(); t-- > 1;) v[t] -= v[t - 1];
        v.erase(v.begin());
    }
    for (int i = 0; i < D; ++i) {
        const auto s = static_cast<std::size_t>(season);
        if (v.size() <= s) throw ComputeError("series too short to difference");
        for (std::size_t t = v.size(); t-- > s;) v[t] -= v[t - s];
        v.erase(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(s));
    }
    return v;
}

// Coefficients a_k of the expanded AR polynomial, phi(B) * PHI(B) written as
// 1 - sum a_k B^k.
std::vector<double> expand_ar(const std::vector<double>& ar,
                              const std::vector<double>& sar, int season) {
    std::vector<double> full(ar.size() + sar.size() * season, 0.0);
    for (std::size_t i = 0; i < ar.size(); ++i) full[i] += ar[i];
    for (std::size_t j = 0; j < sar.size(); ++j) {
        const std::size_t js = (j + 1) * static_cast<std::size_t>(season);
        full[js - 1] += sar[j];
        for (std::size_t i = 0; i < ar.size(); ++i)
            full[js + i] -= sar[j] * ar[i];
    }
    return full;
}

// Coefficients b_k of theta(B) * THETA(B) written as 1 + sum b_k B^k.
std::vector<double> expand_ma(const std::vector<double>& ma,
                              const std::vector<double>& sma, int season) {
    std::vector<double> full(ma.size() + sma.size() * season, 0.0);
    for (std::size_t i = 0; i < ma.size(); ++i) full[i] += ma[i];
    for (std::size_t j = 0; j < sma.size(); ++j) {
        const std::size_t js = (j + 1) * static_cast<std::size_t>(season);
        full[js - 1] += sma[j];
        for (std::size_t i = 0; i < ma.size(); ++i)
            full[js + i] += sma[j] * ma[i];
    }
    return full;
}

// Coefficients d_k with (1-B)^d (1-B^s)^D = 1 - sum d_k B^k, so that
// x_t = w_t + sum d_k x_{t-k} reverses the differencing.
std::vector<double> differencing_weights(int d, int D, int season) {
    std::vector<double> poly{1.0};
    auto multiply = [&](std::size_t lag) {
        std::vector<double> next(poly.size() + lag, 0.0);
        for (std::size_t i = 0; i < poly.size(); ++i) {
            next[i] += poly[i];
            next[i + lag] -= poly[i];
        }
        poly = std::move(next);
    };
    for (int i = 0; i < d; ++i) multiply(1);
    for (int i = 0; i < D; ++i) multiply(static_cast<std::size_t>(season));
    std::vector<double> weights(poly.size() - 1);
    for (std::size_t k = 1; k < poly.size(); ++k) weights[k - 1] = -poly[k];
    return weights;
}

// One pass of the conditional residual recursion. Residuals before `ncond`
// are fixed at zero; returns the residual vector aligned with z.
std::vector<double> residual_recursion(const std::vector<double>& z,
                                       const std::vector<double>& ar_full,
                                       const std::vector<double>& ma_full) {
    const std::size_t ncond = ar_full.size();
    std::vector<double> resid(z.size(), 0.0);
    for (std::size_t t = ncond; t < z.size(); ++t) {
        double e = z[t];
        for (std::size_t i = 0; i < ar_full.size(); ++i)
            e -= ar_full[i] * z[t - i - 1];
        for (std::size_t j = 0; j < ma_full.size() && j < t; ++j) {
            if (t - j - 1 >= ncond) e -= ma_full[j] * resid[t - j - 1];
        }
        resid[t] = e;
    }
    return resid;
}

double css_of(const std::vector<double>& z, const std::vector<double>& ar_full,
              const std::vector<double>& ma_full, std::size_t* count = nullptr) {
    const std::size_t ncond = ar_full.size();
    if (z.size() <= ncond) throw ComputeError("series too short for CSS");
    const auto resid = residual_recursion(z, ar_full, ma_full);
    double ss = 0.0;
    for (std::size_t t = ncond; t < z.size(); ++t) ss += resid[t] * resid[t];
    if (count) *count = z.size() - ncond;
    return ss;
}

} // namespace

bool ar_is_stationary(const std::vector<double>& ar_coeffs) {
    // Schur-Cohn: step the Levinson recursion backwards; all reflection
    // coefficients must lie strictly inside the unit interval.
    std::vector<double> c = ar_coeffs;
    for (std::size_t k = c.size(); k > 0; --k) {
        const double r = c[k - 1];
        if (!std::isfinite(r) || std::abs(r) >= 1.0) return false;
        if (k == 1) break;
        std::vector<double> next(k - 1);
        const double denom = 1.0 - r * r;
        for (std::size_t i = 0; i < k - 1; ++i)
            next[i] = (c[i] + r * c[k - 2 - i]) / denom;
        c = std::move(next);
    }
    return true;
}

// ---------------------------------------------------------------------------
// SARIMA
// ---------------------------------------------------------------------------

void SarimaConfig::validate(std::size_t train_length) const {
    if (p < 0 || d < 0 || q < 0 || P < 0 || D < 0 || Q < 0)
        throw ConfigError("SARIMA orders must be non-negative");
    if ((P > 0 || D > 0 || Q > 0) && season < 2)
        throw ConfigError("seasonal orders require a season length >= 2");
    const std::size_t need = static_cast<std::size_t>(d) +
                             static_cast<std::size_t>(D) * season +
                             std::max(static_cast<std::size_t>(p),
                                      static_cast<std::size_t>(P) * season);
    if (need >= train_length)
        throw ConfigError("SARIMA orders too large for a series of length " +
                          std::to_string(train_length));
}

std::size_t SarimaModel::min_history() const {
    const auto& c = config;
    const std::size_t ar_len = c.p + static_cast<std::size_t>(c.P) * c.season;
    const std::size_t ma_len = c.q + static_cast<std::size_t>(c.Q) * c.season;
    return static_cast<std::size_t>(c.d) +
           static_cast<std::size_t>(c.D) * c.season + std::max(ar_len, ma_len) +
           1;
}

double SarimaModel::predict_one(std::span<const double> history) const {
    if (history.size() < min_history())
        throw ComputeError("insufficient history for SARIMA forecast: have " +
                           std::to_string(history.size()) + ", need " +
                           std::to_string(min_history()));
    const auto& c = config;
    std::vector<double> w = difference(
        std::vector<double>(history.begin(), history.end()), c.d, c.D, c.season);

    const auto ar_full = expand_ar(ar, sar, c.season);
    const auto ma_full = expand_ma(ma, sma, c.season);
    const std::size_t m = w.size();
    const std::size_t ncond = ar_full.size();

    std::vector<double> z(m);
    for (std::size_t t = 0; t < m; ++t) z[t] = w[t] - intercept;
    const auto resid = residual_recursion(z, ar_full, ma_full);

    double zhat = 0.0;
    for (std::size_t i = 0; i < ar_full.size() && i < m; ++i)
        zhat += ar_full[i] * z[m - i - 1];
    for (std::size_t j = 0; j < ma_full.size() && j < m; ++j) {
        if (m - j - 1 >= ncond) zhat += ma_full[j] * resid[m - j - 1];
    }
    double forecast = zhat + intercept;

    const auto weights = differencing_weights(c.d, c.D, c.season);
    for (std::size_t k = 0; k < weights.size(); ++k)
        forecast += weights[k] * history[history.size() - k - 1];
    return forecast;
}

double sarima_css(const std::vector<double>& values, const SarimaModel& model) {
    const auto& c = model.config;
    const auto w = difference(values, c.d, c.D, c.season);
    const auto ar_full = expand_ar(model.ar, model.sar, c.season);
    const auto ma_full = expand_ma(model.ma, model.sma, c.season);
    std::vector<double> z(w.size());
    for (std::size_t t = 0; t < w.size(); ++t) z[t] = w[t] - model.intercept;
    return css_of(z, ar_full, ma_full);
}

SarimaModel fit_sarima(const TimeSeries& train, const SarimaConfig& config,
                       const SarimaFitOptions& options) {
    config.validate(train.size());
    const auto w = difference(train.values, config.d, config.D, config.season);
    if (w.size() < 2) throw ConfigError("differenced series too short");
    const double w_mean = std::accumulate(w.begin(), w.end(), 0.0) /
                          static_cast<double>(w.size());

    const std::size_t np = config.p, nq = config.q, nP = config.P, nQ = config.Q;
    const std::size_t dim = np + nq + nP + nQ + 1; // + intercept

    auto unpack = [&](const std::vector<double>& x, SarimaModel& m) {
        m.ar.assign(x.begin(), x.begin() + np);
        m.ma.assign(x.begin() + np, x.begin() + np + nq);
        m.sar.assign(x.begin() + np + nq, x.begin() + np + nq + nP);
        m.sma.assign(x.begin() + np + nq + nP, x.begin() + np + nq + nP + nQ);
        m.intercept = x.back();
    };

    auto objective = [&](const std::vector<double>& x) -> double {
        SarimaModel m;
        m.config = config;
        unpack(x, m);
        if (!ar_is_stationary(m.ar) || !ar_is_stationary(m.sar))
            return std::numeric_limits<double>::infinity();
        const auto ar_full = expand_ar(m.ar, m.sar, config.season);
        const auto ma_full = expand_ma(m.ma, m.sma, config.season);
        std::vector<double> z(w.size());
        for (std::size_t t = 0; t < w.size(); ++t) z[t] = w[t] - m.intercept;
        const double css = css_of(z, ar_full, ma_full);
        return std::isfinite(css) ? css
                                  : std::numeric_limits<double>::infinity();
    };

    std::vector<double> start(dim, 0.0);
    start.back() = w_mean;

    NelderMeadOptions nm;
    nm.max_iterations = options.max_iterations;
    nm.tolerance = options.tolerance;
    const auto result = nelder_mead(objective, start, nm);

    SarimaModel model;
    model.config = config;
    unpack(result.x, model);
    if (!ar_is_stationary(model.ar) || !ar_is_stationary(model.sar))
        throw ComputeError("SARIMA fit ended at a non-stationary AR polynomial");

    const auto ar_full = expand_ar(model.ar, model.sar, config.season);
    const auto ma_full = expand_ma(model.ma, model.sma, config.season);
    std::vector<double> z(w.size());
    for (std::size_t t = 0; t < w.size(); ++t) z[t] = w[t] - model.intercept;
    std::size_t count = 0;
    const double css = css_of(z, ar_full, ma_full, &count);

    model.residual_variance = css / static_cast<double>(count);
    model.fit.css = css;
    model.fit.iterations = result.iterations;
    model.fit.converged = result.converged;
    model.fit.css_trace = result.best_trace;
    return model;
}

void save_sarima(const SarimaModel& model, const std::string& path) {
    nlohmann::json j;
    j["config"] = {{"p", model.config.p}, {"d", model.config.d},
                   {"q", model.config.q}, {"P", model.config.P},
                   {"D", model.config.D}, {"Q", model.config.Q},
                   {"season", model.config.season}};
    j["ar"] = model.ar;
    j["ma"] = model.ma;
    j["sar"] = model.sar;
    j["sma"] = model.sma;
    j["intercept"] = model.intercept;
    j["residual_variance"] = model.residual_variance;
    j["fit_metadata"] = {{"css", model.fit.css},
                         {"iterations", model.fit.iterations},
                         {"converged", model.fit.converged}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

SarimaModel load_sarima(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
        SarimaModel m;
        m.config.p = j.at("config").at("p").get<int>();
        m.config.d = j.at("config").at("d").get<int>();
        m.config.q = j.at("config").at("q").get<int>();
        m.config.P = j.at("config").at("P").get<int>();
        m.config.D = j.at("config").at("D").get<int>();
        m.config.Q = j.at("config").at("Q").get<int>();
        m.config.season = j.at("config").at("season").get<int>();
        m.ar = j.at("ar").get<std::vector<double>>();
        m.ma = j.at("ma").get<std::vector<double>>();
        m.sar = j.at("sar").get<std::vector<double>>();
        m.sma = j.at("sma").get<std::vector<double>>();
        m.intercept = j.at("intercept").get<double>();
        m.residual_variance = j.at("residual_variance").get<double>();
        m.fit.css = j.at("fit_metadata").at("css").get<double>();
        m.fit.iterations = j.at("fit_metadata").at("iterations").get<std::size_t>();
        m.fit.converged = j.at("fit_metadata").at("converged").get<bool>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed model file " + path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Rolling forecasts, simple experts, decorators
// ---------------------------------------------------------------------------

std::vector<double> rolling_forecast(const ExpertModel& model,
                                     const TimeSeries& series,
                                     std::size_t first_target,
                                     std::size_t last_target) {
    if (last_target > series.size() || first_target > last_target)
        throw ConfigError("forecast range outside the series");
    if (first_target < model.min_history())
        throw ComputeError("forecast range starts before " + model.name() +
                           " has enough history (needs " +
                           std::to_string(model.min_history()) + " values)");
    std::vector<double> preds;
    preds.reserve(last_target - first_target);
    const std::span<const double> all(series.values);
    for (std::size_t t = first_target; t < last_target; ++t)
        preds.push_back(model.predict_one(all.subspan(0, t)));
    return preds;
}

SeasonalNaiveExpert::SeasonalNaiveExpert(std::size_t season) : season_(season) {
    if (season == 0) throw ConfigError("season length must be >= 1");
}

double SeasonalNaiveExpert::predict_one(std::span<const double> history) const {
    if (history.size() < season_)
        throw ComputeError("history shorter than one season");
    return history[history.size() - season_];
}

NoisyExpert::NoisyExpert(std::shared_ptr<const ExpertModel> inner,
                         double amplitude, std::uint64_t seed,
                         NoiseDistribution dist)
    : inner_(std::move(inner)), amplitude_(amplitude), seed_(seed), dist_(dist) {
    if (!inner_) throw ConfigError("noisy decorator needs an inner expert");
    if (amplitude < 0) throw ConfigError("noise amplitude must be >= 0");
}

double NoisyExpert::predict_one(std::span<const double> history) const {
    const double base = inner_->predict_one(history);
    const std::uint64_t key = history.size();
    if (dist_ == NoiseDistribution::Uniform)
        return base + stateless_uniform_offset(seed_, key, amplitude_);
    // Gaussian with sigma = amplitude, still a pure function of (seed, key).
    const std::uint64_t b1 = splitmix64(splitmix64(seed_) ^ key);
    const std::uint64_t b2 = splitmix64(b1 ^ 0xda442d24u);
    double u1 = bits_to_unit_double(b1);
    const double u2 = bits_to_unit_double(b2);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return base + amplitude_ * std::sqrt(-2.0 * std::log(u1)) *
                      std::cos(2.0 * M_PI * u2);
}

LaggedExpert::LaggedExpert(std::size_t lag) : lag_(lag) {
    if (lag == 0) throw ConfigError("lag must be >= 1");
}

double LaggedExpert::predict_one(std::span<const double> history) const {
    if (history.size() < lag_)
        throw ComputeError("history shorter than the lag");
    return history[history.size() - lag_];
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

TimeSeries simulate_arma(const ArmaSimSpec& spec) {
    if (!ar_is_stationary(spec.ar))
        throw ComputeError("simulate_arma: non-stationary AR polynomial");
    if (spec.noise_std < 0) throw ConfigError("noise_std must be >= 0");

    const std::size_t burn = 10 * (spec.ar.size() + spec.ma.size() + 1);
    const std::size_t total = burn + spec.length;
    Rng rng(spec.seed);

    std::vector<double> noise(total);
    for (double& e : noise) e = spec.noise_std * rng.next_gaussian();

    std::vector<double> x(total, 0.0);
    for (std::size_t t = 0; t < total; ++t) {
        double v = spec.intercept + noise[t];
        for (std::size_t i = 0; i < spec.ar.size() && i < t; ++i)
            v += spec.ar[i] * x[t - i - 1];
        for (std::size_t j = 0; j < spec.ma.size() && j < t; ++j)
            v += spec.ma[j] * noise[t - j - 1];
        x[t] = v;
    }

    TimeSeries out;
    out.start_time = 0;
    out.interval = 1;
    out.values.assign(x.begin() + static_cast<std::ptrdiff_t>(burn), x.end());
    return out;
}

} // namespace kinn
