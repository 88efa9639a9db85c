#pragma once

// Adaptive probabilistic forecasting: per-lead-time quantile ensembles that
// define a time-varying inverse CDF for load and renewable injection.

#include <chrono>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace apsems {

using TimePoint = std::chrono::sys_seconds;

struct TimeSeries {
    TimePoint start{};
    double step_seconds = 900.0;
    std::vector<double> values;  // MW

    std::size_t size() const noexcept { return values.size(); }
    TimePoint time_at(std::size_t i) const;
    /// The n values ending at index `last` (inclusive), oldest first.
    std::span<const double> lags_ending_at(std::size_t last, int n) const;
};

/// Load and renewable series sharing one time axis.
struct SeriesPair {
    TimeSeries load;
    TimeSeries wind;
};

/// Parses `timestamp,load_mw,wind_mw` with ISO-8601 timestamps on a constant
/// step. Malformed rows raise IngestError carrying the line number.
SeriesPair read_series_csv(const std::filesystem::path& path);
void write_series_csv(const std::filesystem::path& path, const SeriesPair& series);

TimePoint parse_iso8601(const std::string& text);
std::string format_iso8601(TimePoint t);

enum class VariableKind { Load, Renewable };

struct QuantileForecast {
    TimePoint issue_time{};
    VariableKind kind = VariableKind::Load;
    std::vector<double> tau;                   // ascending, contains 0.5
    std::vector<std::vector<double>> values;   // [lead-1][tau index], MW

    int horizon() const noexcept { return static_cast<int>(values.size()); }
    /// Quantile row of lead time `lead` (1-based).
    std::span<const double> row(int lead) const;
    double median(int lead) const;
};

/// Linear interpolation of order statistics, h = (n - 1) * tau. `sorted` must be
/// ascending and non-empty.
double empirical_quantile(std::span<const double> sorted, double tau);

/// Default quantile levels.
std::vector<double> default_tau_grid();

class QuantileEstimator {
public:
    virtual ~QuantileEstimator() = default;
    virtual int n_lags() const noexcept = 0;
    virtual const std::vector<double>& tau_grid() const noexcept = 0;
    virtual VariableKind kind() const noexcept = 0;
    /// `lags` holds the most recent n_lags() values, oldest first.
    virtual QuantileForecast predict(std::span<const double> lags, int horizon, TimePoint issue_time) const = 0;
};

struct AnalogOptions {
    int neighbors = 30;
    VariableKind kind = VariableKind::Load;
};

/// k-nearest-neighbour analog estimator. The m historical lag vectors closest
/// (Euclidean) to the query supply their realised k-step-ahead values; the
/// empirical quantiles of that set form the forecast row for lead k. Ties in
/// distance resolve towards the earlier history index.
class AnalogQuantileEstimator final : public QuantileEstimator {
public:
    AnalogQuantileEstimator(const TimeSeries& history, int n_lags, std::vector<double> tau_grid, AnalogOptions opts);

    int n_lags() const noexcept override { return n_lags_; }
    const std::vector<double>& tau_grid() const noexcept override { return tau_; }
    VariableKind kind() const noexcept override { return opts_.kind; }
    int neighbors() const noexcept { return opts_.neighbors; }

    QuantileForecast predict(std::span<const double> lags, int horizon, TimePoint issue_time) const override;

    /// History indices (window end points) of the analogs used for a query.
    std::vector<std::size_t> analog_indices(std::span<const double> lags, int horizon) const;
    const std::vector<double>& history() const noexcept { return values_; }

private:
    std::vector<double> values_;
    int n_lags_;
    std::vector<double> tau_;
    AnalogOptions opts_;
};

/// Fits the default analog estimator. Requires at least 10 * n_lags history
/// points and a strictly ascending tau grid in (0, 1) containing 0.5.
AnalogQuantileEstimator fit_quantile_estimator(const TimeSeries& history, int n_lags,
                                               std::vector<double> tau_grid, AnalogOptions opts = {});

QuantileForecast predict_quantiles(const QuantileEstimator& est, std::span<const double> lags, int horizon,
                                   TimePoint issue_time = {});

/// Piecewise-linear inverse CDF through (tau_i, Q_i), clamped to the outermost
/// quantiles outside the grid. Requires u in (0, 1).
double sample_inverse_cdf(const QuantileForecast& qf, int lead, double u);

struct NetLoadForecast {
    /// xi[0] is the measured net load; xi[k] (k >= 1) the median net-load
    /// forecast at lead k. pu of s_base.
    std::vector<double> xi;
    QuantileForecast load;
    QuantileForecast renewable;
    double s_base = 1.0;

    int horizon() const noexcept { return load.horizon(); }
};

NetLoadForecast net_load_forecast(QuantileForecast load_qf, QuantileForecast ren_qf, double measured_xi0_pu,
                                  double s_base = 1.0);

/// Writes `tau,value_mw` for one lead time.
void write_forecast_csv(const std::filesystem::path& path, const QuantileForecast& qf, int lead);

}  // namespace apsems
