#include "apsems/freqres.hpp"

#include <algorithm>
#include <cmath>

#include "apsems/errors.hpp"

namespace apsems {

double min_damping(double p_nl, double r_ss, double r_tr) {
    if (!(r_ss > 0.0)) throw DomainError("r_ss must be > 0");
    if (!(r_tr >= 0.0 && r_tr < 1.0)) throw DomainError("r_tr must lie in [0, 1)");
    return p_nl / (r_ss * (1.0 - r_tr));
}

double min_inertia(double p_nl, double rocof_max) {
    if (!(rocof_max > 0.0)) throw DomainError("rocof_max must be > 0");
    return p_nl / rocof_max;
}

SystemResponse aggregate(const ReserveAllocation& alloc, const std::vector<GeneratorSpec>& gens) {
    if (alloc.gt_droops.size() != gens.size() || alloc.gt_states.size() != gens.size()) {
        throw DomainError("reserve allocation length does not match generator count");
    }
    SystemResponse r{alloc.ess_droop, alloc.ess_vinertia};
    for (std::size_t g = 0; g < gens.size(); ++g) {
        if (alloc.gt_states[g] != 0) {
            r.damping += alloc.gt_droops[g];
            r.inertia += gens[g].inertia_m;
        }
    }
    return r;
}

bool HeadroomReport::all_ok() const {
    return ess_ok && std::all_of(gt_ok.begin(), gt_ok.end(), [](bool b) { return b; });
}

HeadroomReport device_headroom_ok(const ReserveAllocation& alloc, const std::vector<double>& gt_powers,
                                  double ess_dispatch, const std::vector<GeneratorSpec>& gens, const EssSpec& ess,
                                  const GridSpec& grid) {
    if (gt_powers.size() != gens.size() || alloc.gt_droops.size() != gens.size() ||
        alloc.gt_states.size() != gens.size()) {
        throw DomainError("headroom check: vector lengths do not match generator count");
    }
    constexpr double tol = 1e-9;
    HeadroomReport rep;
    rep.ess_budget = alloc.ess_vinertia * grid.rocof_max + alloc.ess_droop * grid.r_tr;
    rep.ess_headroom = ess.p_max - std::abs(ess_dispatch);
    rep.ess_ok = rep.ess_budget <= rep.ess_headroom + tol;

    for (std::size_t g = 0; g < gens.size(); ++g) {
        const bool online = alloc.gt_states[g] != 0;
        const double budget = online ? alloc.gt_droops[g] * grid.r_tr : 0.0;
        const double headroom =
            online ? std::min(gens[g].p_max - gt_powers[g], gt_powers[g] - gens[g].p_min) : 0.0;
        rep.gt_budget.push_back(budget);
        rep.gt_headroom.push_back(headroom);
        rep.gt_ok.push_back(!online || budget <= headroom + tol);
    }
    return rep;
}

double EnergyDeviationBound::milp_rhs() const { return std::min({rhs_upper, rhs_lower, rhs_lambda}); }

bool EnergyDeviationBound::admits(double usage_pu_s) const {
    const double u = std::abs(usage_pu_s);
    return u <= hat_delta_e + 1e-12 && u <= allowed + 1e-12;
}

EnergyDeviationBound energy_bound(const ReserveAllocation& alloc, const GridSpec& grid, const HorizonSpec& horizon,
                                  const EssSpec& ess, double soc_now) {
    if (!(soc_now >= 0.0 && soc_now <= 1.0)) throw DomainError("soc must lie in [0, 1]");
    EnergyDeviationBound b;
    const double mb = alloc.ess_vinertia;
    const double db = alloc.ess_droop;
    const double t = horizon.step_seconds;
    b.s_base = grid.s_base;
    b.hat_delta_e = mb * grid.r_tr + db * grid.r_ss * t;
    b.allowed = ess.lambda * soc_now * ess.e_max * 3600.0 / grid.s_base;
    b.nu = grid.r_ss * grid.s_base / (3600.0 * ess.e_max);
    b.milp_lhs = b.nu * (mb + db * t);
    b.rhs_upper = ess.soc_max - soc_now;
    b.rhs_lower = soc_now - ess.soc_min;
    b.rhs_lambda = ess.lambda * soc_now;
    return b;
}

}  // namespace apsems
