#ifndef KINN_EXPERT_HPP
#define KINN_EXPERT_HPP

#include "kinn/nelder_mead.hpp"
#include "kinn/timeseries.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace kinn {

/**
 * One-step-ahead prediction source. Given the observed history
 * x_0..x_{t-1}, predict_one returns the forecast of x_t. Implementations
 * must depend only on the history, fitted parameters and a fixed seed —
 * never on anything at or after the target.
 */
class ExpertModel {
public:
    virtual ~ExpertModel() = default;

    virtual double predict_one(std::span<const double> history) const = 0;

    /// Shortest history predict_one accepts.
    virtual std::size_t min_history() const = 0;

    virtual std::string name() const = 0;
};

/**
 * One-step forecasts for every target index in [first_target, last_target),
 * each computed from the true observed history up to the step before it.
 */
std::vector<double> rolling_forecast(const ExpertModel& model,
                                     const TimeSeries& series,
                                     std::size_t first_target,
                                     std::size_t last_target);

// ---------------------------------------------------------------------------
// SARIMA
// ---------------------------------------------------------------------------

/// Orders (p,d,q)(P,D,Q)_s.
struct SarimaConfig {
    int p = 1, d = 0, q = 1;
    int P = 0, D = 1, Q = 1;
    int season = 48;

    void validate(std::size_t train_length) const;
};

struct SarimaFitMetadata {
    double css = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    /// Best CSS after each simplex iteration (non-increasing).
    std::vector<double> css_trace;
};

/**
 * Fitted multiplicative seasonal ARIMA. The intercept is the mean of the
 * differenced series; residual_variance is CSS divided by the residual
 * count.
 */
struct SarimaModel {
    SarimaConfig config;
    std::vector<double> ar;   // p
    std::vector<double> ma;   // q
    std::vector<double> sar;  // P
    std::vector<double> sma;  // Q
    double intercept = 0.0;
    double residual_variance = 0.0;
    SarimaFitMetadata fit;

    std::size_t min_history() const;

    /// One-step-ahead forecast from raw (undifferenced) history.
    double predict_one(std::span<const double> history) const;
};

struct SarimaFitOptions {
    std::size_t max_iterations = 2000;
    double tolerance = 1e-8;
};

/**
 * Estimate by minimizing the conditional sum of squared one-step residuals
 * on the differenced series, via Nelder-Mead from a zero coefficient vector
 * with the intercept started at the differenced-series mean. Iterates whose
 * AR polynomials are non-stationary are rejected with an infinite CSS.
 */
SarimaModel fit_sarima(const TimeSeries& train, const SarimaConfig& config,
                       const SarimaFitOptions& options = {});

/// Conditional sum of squared residuals of a parameter set on a raw series.
double sarima_css(const std::vector<double>& values, const SarimaModel& model);

/// True iff the AR polynomial 1 - a_1 z - ... - a_k z^k has all roots
/// outside the unit circle (Schur-Cohn test).
bool ar_is_stationary(const std::vector<double>& ar_coeffs);

/// JSON persistence (schema: config, coefficients, intercept,
/// residual_variance, fit_metadata{css, iterations, converged}).
void save_sarima(const SarimaModel& model, const std::string& path);
SarimaModel load_sarima(const std::string& path);

/// ExpertModel adapter over a fitted SARIMA.
class SarimaExpert : public ExpertModel {
public:
    explicit SarimaExpert(SarimaModel model) : model_(std::move(model)) {}

    double predict_one(std::span<const double> history) const override {
        return model_.predict_one(history);
    }
    std::size_t min_history() const override { return model_.min_history(); }
    std::string name() const override { return "sarima"; }

    const SarimaModel& model() const { return model_; }

private:
    SarimaModel model_;
};

// ---------------------------------------------------------------------------
// Simple experts and decorators
// ---------------------------------------------------------------------------

/// Predicts the value observed one full season earlier (s = 1 gives
/// last-value persistence).
class SeasonalNaiveExpert : public ExpertModel {
public:
    explicit SeasonalNaiveExpert(std::size_t season);

    double predict_one(std::span<const double> history) const override;
    std::size_t min_history() const override { return season_; }
    std::string name() const override { return "seasonal-naive"; }

private:
    std::size_t season_;
};

enum class NoiseDistribution { Uniform, Gaussian };

/**
 * Adds a seeded random offset to the inner expert's prediction. The offset
 * is a pure function of (seed, history length), so predictions still depend
 * only on the history; uniform offsets are bounded by the amplitude.
 */
class NoisyExpert : public ExpertModel {
public:
    NoisyExpert(std::shared_ptr<const ExpertModel> inner, double amplitude,
                std::uint64_t seed,
                NoiseDistribution dist = NoiseDistribution::Uniform);

    double predict_one(std::span<const double> history) const override;
    std::size_t min_history() const override { return inner_->min_history(); }
    std::string name() const override { return "noisy(" + inner_->name() + ")"; }

private:
    std::shared_ptr<const ExpertModel> inner_;
    double amplitude_;
    std::uint64_t seed_;
    NoiseDistribution dist_;
};

/// Predicts zero regardless of the inner expert or the history.
class ZeroExpert : public ExpertModel {
public:
    double predict_one(std::span<const double>) const override { return 0.0; }
    std::size_t min_history() const override { return 0; }
    std::string name() const override { return "zero"; }
};

/// Replays the observed value k steps before the target (k = 1 reproduces
/// the previous observation).
class LaggedExpert : public ExpertModel {
public:
    explicit LaggedExpert(std::size_t lag);

    double predict_one(std::span<const double> history) const override;
    std::size_t min_history() const override { return lag_; }
    std::string name() const override { return "lagged"; }

private:
    std::size_t lag_;
};

// ---------------------------------------------------------------------------
// Simulation (testing oracle)
// ---------------------------------------------------------------------------

struct ArmaSimSpec {
    std::vector<double> ar;
    std::vector<double> ma;
    double intercept = 0.0;
    std::size_t length = 0;
    double noise_std = 1.0;
    std::uint64_t seed = 0;
};

/**
 * x_t = intercept + sum ar_i x_{t-i} + e_t + sum ma_j e_{t-j} with seeded
 * Gaussian innovations; the first 10*(len(ar)+len(ma)+1) samples are
 * discarded as burn-in. The AR polynomial must be stationary.
 */
TimeSeries simulate_arma(const ArmaSimSpec& spec);

} // namespace kinn

#endif // KINN_EXPERT_HPP
