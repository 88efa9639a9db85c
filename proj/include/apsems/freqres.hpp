#pragma once

// Closed-form frequency-security relations: minimum damping and inertia for a
// disturbance, aggregation over online units, device headroom and the ESS
// energy-deviation bound.

#include <vector>

#include "apsems/core_types.hpp"

namespace apsems {

/// Smallest total damping that keeps the post-disturbance deviation within
/// r_ss for a step imbalance p_nl: p_nl / (r_ss (1 - r_tr)).
double min_damping(double p_nl, double r_ss, double r_tr);

/// Smallest total inertia that keeps the initial RoCoF within rocof_max.
double min_inertia(double p_nl, double rocof_max);

struct ReserveAllocation {
    std::vector<double> gt_droops;  // D_g
    double ess_droop = 0.0;         // D_b
    double ess_vinertia = 0.0;      // M_b, s
    std::vector<int> gt_states;     // x^gt
};

struct SystemResponse {
    double damping = 0.0;  // total D
    double inertia = 0.0;  // total M, s
};

/// D = sum x_g D_g + D_b, M = sum x_g M_g + M_b.
SystemResponse aggregate(const ReserveAllocation& alloc, const std::vector<GeneratorSpec>& gens);

struct HeadroomReport {
    bool ess_ok = true;
    double ess_budget = 0.0;    // M_b * rocof_max + D_b * r_tr
    double ess_headroom = 0.0;  // p_max - |dispatch|
    std::vector<bool> gt_ok;
    std::vector<double> gt_budget;    // x_g D_g r_tr
    std::vector<double> gt_headroom;  // min(p_max - P, P - p_min) when online

    bool all_ok() const;
};

/// Checks that each device can deliver its assigned primary-control power
/// excursion around its scheduled dispatch. Offline units contribute no droop
/// and always pass.
HeadroomReport device_headroom_ok(const ReserveAllocation& alloc, const std::vector<double>& gt_powers,
                                  double ess_dispatch, const std::vector<GeneratorSpec>& gens, const EssSpec& ess,
                                  const GridSpec& grid);

struct EnergyDeviationBound {
    double hat_delta_e = 0.0;  // M_b r_tr + D_b r_ss T, pu*s
    double allowed = 0.0;      // lambda * soc * E_max, pu*s
    double nu = 0.0;           // r_ss S_b / (3600 E_max)
    double milp_lhs = 0.0;     // nu (M_b + D_b T)
    double rhs_upper = 0.0;    // soc_max - soc
    double rhs_lower = 0.0;    // soc - soc_min
    double rhs_lambda = 0.0;   // lambda * soc
    double s_base = 1.0;

    double milp_rhs() const;
    /// Energy in pu*s converted to MWh.
    double to_mwh(double pu_s) const { return pu_s * s_base / 3600.0; }
    double allowed_mwh() const { return to_mwh(allowed); }
    /// True when an energy use (pu*s, magnitude) stays within both bounds.
    bool admits(double usage_pu_s) const;
};

EnergyDeviationBound energy_bound(const ReserveAllocation& alloc, const GridSpec& grid, const HorizonSpec& horizon,
                                  const EssSpec& ess, double soc_now);

}  // namespace apsems
