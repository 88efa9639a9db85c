#pragma once

// Centre-of-inertia swing dynamics with aggregate droop and (virtual) inertia.
//
// State is the deviation d = X - 1 of the frequency ratio X = omega / omega_s:
//
//     M dd/dt = -D d - P_nl / (1 + d)
//
// with P_nl > 0 a net load increase. Damping enters with negative feedback.
// The ESS primary-control power is p_ess = M_b dd/dt + D_b d and its energy
// deviation the running integral of p_ess.

#include <filesystem>
#include <utility>
#include <vector>

#include "apsems/core_types.hpp"
#include "apsems/freqres.hpp"

namespace apsems {

/// Piecewise-linear disturbance in pu. Breakpoints are (t, value) pairs with
/// non-decreasing t; two points at the same instant form a jump. The value is
/// zero before the first breakpoint and constant after the last.
class DisturbanceProfile {
public:
    DisturbanceProfile() = default;
    explicit DisturbanceProfile(std::vector<std::pair<double, double>> points);

    static DisturbanceProfile none() { return {}; }
    static DisturbanceProfile step(double t_event, double magnitude);
    /// Linear rise from 0 at t_start to `magnitude` at t_end, constant afterwards.
    static DisturbanceProfile ramp(double t_start, double t_end, double magnitude);

    const std::vector<std::pair<double, double>>& points() const noexcept { return points_; }
    /// Right-continuous value.
    double at(double t) const;
    bool is_zero() const;

private:
    std::vector<std::pair<double, double>> points_;
};

struct ReserveSplit {
    double gt_droop_sum = 0.0;
    double gt_inertia_sum = 0.0;
    double ess_droop = 0.0;     // D_b
    double ess_vinertia = 0.0;  // M_b
};

struct SwingScenario {
    double m_total = 0.0;  // s
    double d_total = 0.0;  // pu / pu
    ReserveSplit split;
    DisturbanceProfile disturbance;
    double duration = 60.0;  // s
    double dt = 1e-3;        // s
    int record_stride = 1;

    /// Totals taken from the split.
    static SwingScenario from_split(const ReserveSplit& split, DisturbanceProfile disturbance, double duration = 60.0,
                                    double dt = 1e-3);
};

struct SwingMetrics {
    double nadir = 0.0;            // min deviation
    double zenith = 0.0;           // max deviation
    double max_deviation = 0.0;    // max |deviation|
    double max_rocof = 0.0;        // max |d deviation / dt|, pu/s
    double steady_state = 0.0;     // |deviation| at the end of the window
    double energy_dev = 0.0;       // |integral of p_ess| at the end, pu*s
    double max_energy_dev = 0.0;   // max |integral of p_ess| over the window
};

struct SwingTrace {
    std::vector<double> t;
    std::vector<double> x;           // frequency ratio
    std::vector<double> rocof;       // pu/s
    std::vector<double> p_ess;       // pu
    std::vector<double> energy_dev;  // pu*s
    SwingMetrics metrics;
};

/// Fixed-step RK4. Steps are split at disturbance breakpoints so the
/// integrand stays smooth inside every stage. Throws IntegrationError when the
/// deviation diverges (|d| > 1 or non-finite).
SwingTrace simulate(const SwingScenario& sc);

struct BoundsReport {
    bool steady_state_ok = true;
    bool transient_ok = true;
    bool rocof_ok = true;
    bool energy_ok = true;
    double steady_state_margin = 0.0;  // r_ss - |d_end|
    double transient_margin = 0.0;     // r_tr - max |d|
    double rocof_margin = 0.0;         // rocof_max - max |rocof|
    double energy_margin = 0.0;        // min(hat, allowed) - |dE|

    bool all_ok() const { return steady_state_ok && transient_ok && rocof_ok && energy_ok; }
};

BoundsReport verify_bounds(const SwingTrace& trace, const GridSpec& grid, const EnergyDeviationBound& bound);

struct ConvergenceReport {
    double error_coarse = 0.0;  // max |x_dt - x_ref| on the coarse grid
    double error_fine = 0.0;    // max |x_dt/2 - x_ref|
    double ratio = 0.0;         // error_coarse / error_fine
    double order = 0.0;         // log2(ratio)
};

/// Self-convergence study: runs at dt, dt/2 and dt/8 (reference).
ConvergenceReport convergence_check(const SwingScenario& sc);

/// `t_s,x,rocof,p_ess_pu,energy_dev_pu_s`
void write_trace_csv(const std::filesystem::path& path, const SwingTrace& trace);

}  // namespace apsems
