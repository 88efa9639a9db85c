#pragma once

// Robust unit-commitment MILP of one EMS step. Periods p = 0..K-1 cover the
// horizon; period p balances xi[p] and must withstand the sampled
// perturbations pert[i][p] = |xi[p] - delta^i_{p+1}|.
//
// Variables per period (in this order):
//   per unit g: x_gt, u_on, u_off, P_gt, z_plus, z_minus, D_g
//   ESS:        P_ch, P_dis, s_dis, soc, D_b, M_b
//   per config: b_j, Dcfg_j   (J = 2^Ng)
// Row groups are listed by `row_group_names()`.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "apsems/core_types.hpp"
#include "apsems/forecast.hpp"
#include "apsems/milp_model.hpp"
#include "apsems/scenario.hpp"

namespace apsems {

enum class Variant { I, II, III };

std::string to_string(Variant v);
/// Accepts "I", "II", "III" (also 1, 2, 3). Throws ConfigError otherwise.
Variant parse_variant(const std::string& text);

struct Weights {
    double deviation = 0.5;      // cost per pu of |P - p_opt| per period
    double droop_gt = 0.01;      // per unit of D_g per period
    double droop_ess = 0.05;     // per unit of D_b per period
    double vinertia_ess = 0.05;  // per second of M_b per period
    /// Value of one unit of terminal SoC (subtracted from the cost). When
    /// unset it is the largest fuel_b times E_max / (S_b eta_ch): the cost of
    /// recharging that energy from the dearest unit.
    std::optional<double> soc_terminal;
};

struct ModelInputs {
    std::vector<double> xi;                           // >= K entries, pu
    std::vector<std::vector<double>> perturbations;   // N x (>= K), pu
    double soc0 = 0.5;
    std::vector<int> prev_states;                     // Ng
    Variant variant = Variant::III;
    Weights weights;
};

/// Closed-form model size for Ng units, K periods and N scenarios.
struct ModelCounts {
    int variables = 0;
    int binaries = 0;
    int rows = 0;
    int sos_sets = 0;
};
ModelCounts model_counts(int n_g, int k_steps, int n_scen, Variant variant);

std::vector<std::string> row_group_names();

/// Validates the inputs and builds the model. Throws BuildError when inputs
/// are inconsistent or bounds are infeasible by construction.
MilpModel build_model(const System& sys, const ModelInputs& in);
MilpModel build_model(const System& sys, const NetLoadForecast& fc, const ScenarioSet& scen, double soc0,
                      std::span<const int> prev_states, Variant variant, const Weights& weights);

/// 2 max P_nl / (r_ss (1 - r_tr)) + 1.
double big_m_value(const ScenarioSet& scen, const GridSpec& grid);
double big_m_value(double max_perturbation, const GridSpec& grid);
/// Constant used by the builder: big_m_value raised where needed so every
/// deactivated row is slack (GT headroom rows need p_max and p_min + D r_tr).
double effective_big_m(double max_perturbation, const System& sys);

/// Typed view of the variable indices of a built model.
struct ModelLayout {
    int n_g = 0;
    int k_steps = 0;
    int n_cfg = 0;
    struct Period {
        std::vector<int> x, u_on, u_off, p, z_plus, z_minus, droop;
        int p_ch = -1, p_dis = -1, s_dis = -1, soc = -1, d_b = -1, m_b = -1;
        std::vector<int> b, d_cfg;
    };
    std::vector<Period> periods;
};
ModelLayout layout_of(const MilpModel& model);

struct StepDecision {
    std::vector<int> gt_states;
    std::vector<int> startups;
    std::vector<int> shutdowns;
    std::vector<double> gt_powers;   // pu
    std::vector<double> droops;      // D_g
    std::vector<double> dev_plus;
    std::vector<double> dev_minus;
    double ess_charge = 0.0;         // pu
    double ess_discharge = 0.0;      // pu
    int discharging = 0;             // s_k
    double soc = 0.0;                // end of period
    std::vector<int> config_indicators;
    std::vector<double> config_damping;
    int config = 0;                  // selected A_cf row
    double ess_droop = 0.0;          // D_b
    double ess_vinertia = 0.0;       // M_b
};

struct CostBreakdown {
    double fuel = 0.0;
    double startup = 0.0;
    double deviation = 0.0;
    double reserves = 0.0;
    double soc_value = 0.0;  // credited terminal SoC value (>= 0 reduces cost)
    double total() const { return fuel + startup + deviation + reserves - soc_value; }
};

struct EmsDecision {
    std::vector<StepDecision> steps;
    double objective = 0.0;
    CostBreakdown costs;
};

/// Verifies the vector against every row (residual <= 1e-6), rounds binaries
/// and re-checks the decision invariants. Throws ExtractionError naming the
/// offending rows or steps.
EmsDecision extract_decision(const MilpModel& model, const std::vector<double>& x);

/// Inverse of extract_decision: the full variable vector encoded by a decision.
std::vector<double> decision_vector(const MilpModel& model, const EmsDecision& d);

/// Per-term cost of a variable vector under a built model.
CostBreakdown cost_breakdown(const MilpModel& model, const std::vector<double>& x);

}  // namespace apsems
