#include "apsems/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "apsems/errors.hpp"

namespace apsems {

TimePoint TimeSeries::time_at(std::size_t i) const {
    const auto offset = static_cast<long long>(std::llround(static_cast<double>(i) * step_seconds));
    return start + std::chrono::seconds{offset};
}

std::span<const double> TimeSeries::lags_ending_at(std::size_t last, int n) const {
    if (n <= 0 || last >= values.size() || last + 1 < static_cast<std::size_t>(n)) {
        throw DomainError(fmt::format("lag window of {} ending at {} outside series of length {}", n, last, values.size()));
    }
    return {values.data() + (last + 1 - static_cast<std::size_t>(n)), static_cast<std::size_t>(n)};
}

TimePoint parse_iso8601(const std::string& text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char sep = 0;
    int consumed = 0;
    if (std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &s, &consumed) != 7 ||
        (sep != 'T' && sep != ' ')) {
        throw DomainError("malformed ISO-8601 timestamp '" + text + "'");
    }
    const std::string rest = text.substr(static_cast<std::size_t>(consumed));
    if (!rest.empty() && rest != "Z") throw DomainError("unsupported timestamp suffix '" + rest + "'");
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 60) throw DomainError("invalid calendar timestamp '" + text + "'");
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

std::string format_iso8601(TimePoint t) {
    using namespace std::chrono;
    const auto day_point = floor<days>(t);
    const year_month_day ymd{day_point};
    const hh_mm_ss hms{t - day_point};
    return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hms.hours().count(),
                       hms.minutes().count(), hms.seconds().count());
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

double parse_number(const std::string& cell, const std::string& file, std::size_t line, const char* column) {
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size() || !std::isfinite(v)) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw IngestError(file, line, fmt::format("column {}: '{}' is not a finite number", column, cell));
    }
}

}  // namespace

SeriesPair read_series_csv(const std::filesystem::path& path) {
    const std::string file = path.string();
    std::ifstream in(path);
    if (!in) throw IngestError(file, 0, "cannot open file");

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw IngestError(file, 1, "empty file");
    ++line_no;
    if (trim(line) != "timestamp,load_mw,wind_mw") {
        throw IngestError(file, line_no, "expected header 'timestamp,load_mw,wind_mw'");
    }

    SeriesPair out;
    std::vector<TimePoint> stamps;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != 3) throw IngestError(file, line_no, fmt::format("expected 3 columns, found {}", cells.size()));
        TimePoint t;
        try {
            t = parse_iso8601(trim(cells[0]));
        } catch (const DomainError& e) {
            throw IngestError(file, line_no, e.what());
        }
        if (!stamps.empty()) {
            const auto step = (t - stamps.back()).count();
            if (step <= 0) throw IngestError(file, line_no, "timestamps must be strictly increasing");
            if (stamps.size() >= 2) {
                const auto expected = (stamps[1] - stamps[0]).count();
                if (step != expected) {
                    throw IngestError(file, line_no, fmt::format("step of {} s differs from series step {} s", step, expected));
                }
            }
        }
        stamps.push_back(t);
        out.load.values.push_back(parse_number(trim(cells[1]), file, line_no, "load_mw"));
        out.wind.values.push_back(parse_number(trim(cells[2]), file, line_no, "wind_mw"));
    }
    if (stamps.size() < 2) throw IngestError(file, line_no, "series needs at least two rows");
    const double step = static_cast<double>((stamps[1] - stamps[0]).count());
    out.load.start = out.wind.start = stamps.front();
    out.load.step_seconds = out.wind.step_seconds = step;
    return out;
}

void write_series_csv(const std::filesystem::path& path, const SeriesPair& series) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "timestamp,load_mw,wind_mw\n";
    for (std::size_t i = 0; i < series.load.size(); ++i) {
        out << fmt::format("{},{:.6f},{:.6f}\n", format_iso8601(series.load.time_at(i)), series.load.values[i],
                           series.wind.values[i]);
    }
}

std::span<const double> QuantileForecast::row(int lead) const {
    if (lead < 1 || lead > horizon()) throw DomainError(fmt::format("lead time {} outside 1..{}", lead, horizon()));
    return values[static_cast<std::size_t>(lead - 1)];
}

double QuantileForecast::median(int lead) const {
    const auto it = std::find(tau.begin(), tau.end(), 0.5);
    if (it == tau.end()) throw DomainError("quantile grid has no median level");
    return row(lead)[static_cast<std::size_t>(it - tau.begin())];
}

double empirical_quantile(std::span<const double> sorted, double tau) {
    if (sorted.empty()) throw DomainError("empirical quantile of an empty sample");
    const double h = static_cast<double>(sorted.size() - 1) * tau;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> default_tau_grid() { return {0.025, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.975}; }

AnalogQuantileEstimator::AnalogQuantileEstimator(const TimeSeries& history, int n_lags, std::vector<double> tau_grid,
                                                 AnalogOptions opts)
    : values_(history.values), n_lags_(n_lags), tau_(std::move(tau_grid)), opts_(opts) {
    if (n_lags_ < 1) throw FitError("n_lags must be >= 1");
    if (values_.size() < static_cast<std::size_t>(10 * n_lags_)) {
        throw FitError(fmt::format("history of {} points is shorter than 10 x n_lags = {}", values_.size(), 10 * n_lags_));
    }
    if (opts_.neighbors < 1) throw FitError("neighbour count must be >= 1");
    if (tau_.empty() || std::find(tau_.begin(), tau_.end(), 0.5) == tau_.end()) {
        throw FitError("tau grid must contain 0.5");
    }
    for (std::size_t i = 0; i < tau_.size(); ++i) {
        if (!(tau_[i] > 0.0 && tau_[i] < 1.0)) throw FitError("tau levels must lie in (0, 1)");
        if (i > 0 && !(tau_[i] > tau_[i - 1])) throw FitError("tau grid must be strictly ascending");
    }
    for (double v : values_) {
        if (!std::isfinite(v)) throw FitError("history contains non-finite values");
    }
}

std::vector<std::size_t> AnalogQuantileEstimator::analog_indices(std::span<const double> lags, int horizon) const {
    if (static_cast<int>(lags.size()) != n_lags_) {
        throw DomainError(fmt::format("lag vector has {} entries, estimator expects {}", lags.size(), n_lags_));
    }
    if (horizon < 1) throw DomainError("horizon must be >= 1");
    const std::size_t first = static_cast<std::size_t>(n_lags_ - 1);
    if (values_.size() < first + 1 + static_cast<std::size_t>(horizon)) {
        throw DomainError(fmt::format("history too short for a {}-step horizon", horizon));
    }
    const std::size_t last = values_.size() - 1 - static_cast<std::size_t>(horizon);

    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(last - first + 1);
    for (std::size_t t = first; t <= last; ++t) {
        double d2 = 0.0;
        const double* w = values_.data() + (t + 1 - static_cast<std::size_t>(n_lags_));
        for (int l = 0; l < n_lags_; ++l) {
            const double e = w[l] - lags[static_cast<std::size_t>(l)];
            d2 += e * e;
        }
        dist.emplace_back(d2, t);
    }
    const std::size_t m = std::min(dist.size(), static_cast<std::size_t>(opts_.neighbors));
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(m - 1), dist.end());
    std::sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(m));

    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = dist[i].second;
    return idx;
}

QuantileForecast AnalogQuantileEstimator::predict(std::span<const double> lags, int horizon, TimePoint issue_time) const {
    const auto analogs = analog_indices(lags, horizon);
    QuantileForecast qf;
    qf.issue_time = issue_time;
    qf.kind = opts_.kind;
    qf.tau = tau_;
    qf.values.resize(static_cast<std::size_t>(horizon));
    std::vector<double> targets(analogs.size());
    for (int k = 1; k <= horizon; ++k) {
        for (std::size_t i = 0; i < analogs.size(); ++i) targets[i] = values_[analogs[i] + static_cast<std::size_t>(k)];
        std::sort(targets.begin(), targets.end());
        auto& row = qf.values[static_cast<std::size_t>(k - 1)];
        row.resize(tau_.size());
        for (std::size_t q = 0; q < tau_.size(); ++q) row[q] = empirical_quantile(targets, tau_[q]);
        // monotone rearrangement
        std::sort(row.begin(), row.end());
    }
    return qf;
}

AnalogQuantileEstimator fit_quantile_estimator(const TimeSeries& history, int n_lags, std::vector<double> tau_grid,
                                               AnalogOptions opts) {
    return AnalogQuantileEstimator(history, n_lags, std::move(tau_grid), opts);
}

QuantileForecast predict_quantiles(const QuantileEstimator& est, std::span<const double> lags, int horizon,
                                   TimePoint issue_time) {
    return est.predict(lags, horizon, issue_time);
}

double sample_inverse_cdf(const QuantileForecast& qf, int lead, double u) {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("uniform draw must lie in (0, 1)");
    const auto q = qf.row(lead);
    const auto& tau = qf.tau;
    if (u <= tau.front()) return q.front();
    if (u >= tau.back()) return q.back();
    const auto hi = static_cast<std::size_t>(std::upper_bound(tau.begin(), tau.end(), u) - tau.begin());
    const std::size_t lo = hi - 1;
    const double w = (u - tau[lo]) / (tau[hi] - tau[lo]);
    return q[lo] + w * (q[hi] - q[lo]);
}

NetLoadForecast net_load_forecast(QuantileForecast load_qf, QuantileForecast ren_qf, double measured_xi0_pu,
                                  double s_base) {
    if (load_qf.horizon() != ren_qf.horizon()) {
        throw DomainError(fmt::format("horizon mismatch: load {} vs renewable {}", load_qf.horizon(), ren_qf.horizon()));
    }
    if (load_qf.issue_time != ren_qf.issue_time) throw DomainError("load and renewable forecasts issued at different times");
    if (!(s_base > 0.0)) throw DomainError("s_base must be > 0");
    NetLoadForecast fc;
    fc.s_base = s_base;
    fc.xi.resize(static_cast<std::size_t>(load_qf.horizon()) + 1);
    fc.xi[0] = measured_xi0_pu;
    for (int k = 1; k <= load_qf.horizon(); ++k) {
        fc.xi[static_cast<std::size_t>(k)] = (load_qf.median(k) - ren_qf.median(k)) / s_base;
    }
    fc.load = std::move(load_qf);
    fc.renewable = std::move(ren_qf);
    return fc;
}

void write_forecast_csv(const std::filesystem::path& path, const QuantileForecast& qf, int lead) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "tau,value_mw\n";
    const auto row = qf.row(lead);
    for (std::size_t q = 0; q < qf.tau.size(); ++q) out << fmt::format("{},{:.9g}\n", qf.tau[q], row[q]);
}

}  // namespace apsems
