#include "apsems/swingsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "apsems/errors.hpp"

namespace apsems {

DisturbanceProfile::DisturbanceProfile(std::vector<std::pair<double, double>> points) : points_(std::move(points)) {
    for (std::size_t i = 1; i < points_.size(); ++i) {
        if (points_[i].first < points_[i - 1].first) throw DomainError("disturbance breakpoints must be time-ordered");
    }
    for (const auto& [t, v] : points_) {
        if (!std::isfinite(t) || !std::isfinite(v)) throw DomainError("disturbance breakpoints must be finite");
    }
}

DisturbanceProfile DisturbanceProfile::step(double t_event, double magnitude) {
    return DisturbanceProfile({{t_event, 0.0}, {t_event, magnitude}});
}

DisturbanceProfile DisturbanceProfile::ramp(double t_start, double t_end, double magnitude) {
    if (!(t_end > t_start)) throw DomainError("ramp end must follow its start");
    return DisturbanceProfile({{t_start, 0.0}, {t_end, magnitude}});
}

double DisturbanceProfile::at(double t) const {
    if (points_.empty() || t < points_.front().first) return 0.0;
    const auto it = std::upper_bound(points_.begin(), points_.end(), t,
                                     [](double v, const std::pair<double, double>& p) { return v < p.first; });
    const auto i = static_cast<std::size_t>(it - points_.begin()) - 1;
    if (i + 1 >= points_.size()) return points_[i].second;
    const auto& [t0, v0] = points_[i];
    const auto& [t1, v1] = points_[i + 1];
    return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
}

bool DisturbanceProfile::is_zero() const {
    return std::all_of(points_.begin(), points_.end(), [](const auto& p) { return p.second == 0.0; });
}

SwingScenario SwingScenario::from_split(const ReserveSplit& split, DisturbanceProfile disturbance, double duration,
                                        double dt) {
    SwingScenario sc;
    sc.split = split;
    sc.m_total = split.gt_inertia_sum + split.ess_vinertia;
    sc.d_total = split.gt_droop_sum + split.ess_droop;
    sc.disturbance = std::move(disturbance);
    sc.duration = duration;
    sc.dt = dt;
    return sc;
}

namespace {

/// Linear disturbance law valid on one smooth piece: value = a + b (t - t_ref).
struct Piece {
    double t_ref;
    double a;
    double b;
    double at(double t) const { return a + b * (t - t_ref); }
};

Piece piece_at(const DisturbanceProfile& prof, double mid) {
    const auto& pts = prof.points();
    if (pts.empty() || mid < pts.front().first) return {mid, 0.0, 0.0};
    const auto it = std::upper_bound(pts.begin(), pts.end(), mid,
                                     [](double v, const std::pair<double, double>& p) { return v < p.first; });
    const auto i = static_cast<std::size_t>(it - pts.begin()) - 1;
    if (i + 1 >= pts.size()) return {mid, pts[i].second, 0.0};
    const auto& [t0, v0] = pts[i];
    const auto& [t1, v1] = pts[i + 1];
    return {t0, v0, (v1 - v0) / (t1 - t0)};
}

class SwingRhs {
public:
    SwingRhs(double m, double d) : inv_m_(1.0 / m), d_(d) {}
    double operator()(double dev, double p) const { return -inv_m_ * (d_ * dev + p / (1.0 + dev)); }

private:
    double inv_m_;
    double d_;
};

void check_scenario(const SwingScenario& sc) {
    if (!(sc.m_total > 0.0)) throw DomainError("total inertia must be > 0");
    if (!(sc.dt > 0.0)) throw DomainError("dt must be > 0");
    if (!(sc.duration > 0.0)) throw DomainError("duration must be > 0");
    if (sc.d_total < 0.0) throw DomainError("total damping must be >= 0");
    if (sc.record_stride < 1) throw DomainError("record stride must be >= 1");
    const double tol = 1e-9 * std::max(1.0, std::abs(sc.d_total));
    if (std::abs(sc.split.gt_droop_sum + sc.split.ess_droop - sc.d_total) > tol) {
        throw DomainError("damping split does not sum to the total");
    }
    const double tol_m = 1e-9 * std::max(1.0, sc.m_total);
    if (std::abs(sc.split.gt_inertia_sum + sc.split.ess_vinertia - sc.m_total) > tol_m) {
        throw DomainError("inertia split does not sum to the total");
    }
}

}  // namespace

SwingTrace simulate(const SwingScenario& sc) {
    check_scenario(sc);
    const SwingRhs f(sc.m_total, sc.d_total);
    const double mb = sc.split.ess_vinertia;
    const double db = sc.split.ess_droop;
    const auto n_steps = static_cast<std::size_t>(std::llround(sc.duration / sc.dt));
    if (n_steps == 0) throw DomainError("duration shorter than one step");

    // interior breakpoints that split integration steps
    std::vector<double> breaks;
    for (const auto& p : sc.disturbance.points()) breaks.push_back(p.first);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    SwingTrace tr;
    const std::size_t n_rec = n_steps / static_cast<std::size_t>(sc.record_stride) + 1;
    tr.t.reserve(n_rec);
    tr.x.reserve(n_rec);
    tr.rocof.reserve(n_rec);
    tr.p_ess.reserve(n_rec);
    tr.energy_dev.reserve(n_rec);

    auto& m = tr.metrics;
    double dev = 0.0;
    double energy = 0.0;
    auto observe = [&](double d, double rate) {
        m.nadir = std::min(m.nadir, d);
        m.zenith = std::max(m.zenith, d);
        m.max_rocof = std::max(m.max_rocof, std::abs(rate));
    };
    auto record = [&](double t) {
        const double p = sc.disturbance.at(t);
        const double rate = f(dev, p);
        tr.t.push_back(t);
        tr.x.push_back(1.0 + dev);
        tr.rocof.push_back(rate);
        tr.p_ess.push_back(mb * rate + db * dev);
        tr.energy_dev.push_back(energy);
    };

    std::size_t next_break = 0;
    for (std::size_t n = 0; n < n_steps; ++n) {
        const double t0 = static_cast<double>(n) * sc.dt;
        const double t1 = static_cast<double>(n + 1) * sc.dt;
        if (n % static_cast<std::size_t>(sc.record_stride) == 0) record(t0);

        const double snap = 1e-12 * std::max(1.0, t1);
        while (next_break < breaks.size() && breaks[next_break] <= t0 + snap) ++next_break;
        double a = t0;
        while (a < t1 - snap) {
            double b = t1;
            if (next_break < breaks.size() && breaks[next_break] < t1 - snap) b = breaks[next_break++];
            const double h = b - a;
            const Piece pc = piece_at(sc.disturbance, 0.5 * (a + b));

            const double rate_a = f(dev, pc.at(a));
            observe(dev, rate_a);
            const double p_a = mb * rate_a + db * dev;

            const double k1 = rate_a;
            const double k2 = f(dev + 0.5 * h * k1, pc.at(a + 0.5 * h));
            const double k3 = f(dev + 0.5 * h * k2, pc.at(a + 0.5 * h));
            const double k4 = f(dev + h * k3, pc.at(b));
            dev += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (!std::isfinite(dev) || std::abs(dev) > 1.0) {
                throw IntegrationError(fmt::format("frequency deviation diverged at t = {:.6g} s (dt = {:g} s)", b, sc.dt));
            }

            const double rate_b = f(dev, pc.at(b));
            observe(dev, rate_b);
            const double p_b = mb * rate_b + db * dev;
            energy += 0.5 * (p_a + p_b) * h;
            m.max_energy_dev = std::max(m.max_energy_dev, std::abs(energy));
            a = b;
        }
    }
    record(static_cast<double>(n_steps) * sc.dt);
    if (tr.t.size() >= 2 && tr.t[tr.t.size() - 2] == tr.t.back()) {
        for (auto* v : {&tr.t, &tr.x, &tr.rocof, &tr.p_ess, &tr.energy_dev}) v->erase(v->end() - 2);
    }
    observe(dev, tr.rocof.back());
    m.max_deviation = std::max(std::abs(m.nadir), std::abs(m.zenith));
    m.steady_state = std::abs(dev);
    m.energy_dev = std::abs(energy);
    return tr;
}

BoundsReport verify_bounds(const SwingTrace& trace, const GridSpec& grid, const EnergyDeviationBound& bound) {
    const auto& m = trace.metrics;
    BoundsReport r;
    r.steady_state_margin = grid.r_ss - m.steady_state;
    r.transient_margin = grid.r_tr - m.max_deviation;
    r.rocof_margin = grid.rocof_max - m.max_rocof;
    r.energy_margin = std::min(bound.hat_delta_e, bound.allowed) - m.energy_dev;
    // allocations sized exactly at the minimum sit on the bound; allow roundoff
    constexpr double kRel = 1e-9;
    r.steady_state_ok = r.steady_state_margin >= -kRel * grid.r_ss;
    r.transient_ok = r.transient_margin >= -kRel * grid.r_tr;
    r.rocof_ok = r.rocof_margin >= -kRel * grid.rocof_max;
    r.energy_ok = r.energy_margin >= -kRel * std::max(1.0, std::abs(bound.allowed));
    return r;
}

ConvergenceReport convergence_check(const SwingScenario& sc) {
    auto run = [&](double dt) {
        SwingScenario s = sc;
        s.dt = dt;
        s.record_stride = 1;
        return simulate(s);
    };
    const auto coarse = run(sc.dt);
    const auto fine = run(sc.dt / 2.0);
    const auto ref = run(sc.dt / 8.0);

    ConvergenceReport rep;
    for (std::size_t n = 0; n < coarse.x.size(); ++n) {
        rep.error_coarse = std::max(rep.error_coarse, std::abs(coarse.x[n] - ref.x[8 * n]));
        rep.error_fine = std::max(rep.error_fine, std::abs(fine.x[2 * n] - ref.x[8 * n]));
    }
    if (rep.error_fine > 0.0) {
        rep.ratio = rep.error_coarse / rep.error_fine;
        rep.order = std::log2(rep.ratio);
    }
    return rep;
}

void write_trace_csv(const std::filesystem::path& path, const SwingTrace& trace) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "t_s,x,rocof,p_ess_pu,energy_dev_pu_s\n";
    for (std::size_t i = 0; i < trace.t.size(); ++i) {
        out << fmt::format("{:.6f},{:.12g},{:.12g},{:.12g},{:.12g}\n", trace.t[i], trace.x[i], trace.rocof[i],
                           trace.p_ess[i], trace.energy_dev[i]);
    }
}

}  // namespace apsems
