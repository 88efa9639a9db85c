#pragma once

// Rolling-horizon EMS: forecast -> sample -> optimise -> apply the first
// period -> validate with the swing model -> advance.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "apsems/core_types.hpp"
#include "apsems/ems_builder.hpp"
#include "apsems/forecast.hpp"
#include "apsems/freqres.hpp"
#include "apsems/scenario.hpp"
#include "apsems/solver.hpp"
#include "apsems/swingsim.hpp"

namespace apsems {

struct ValidationSettings {
    double t_event = 1.0;     // s, instant of the validation step
    double duration = 60.0;   // s
    double dt = 1e-3;         // s
    int record_stride = 10;   // trace samples kept per integration step
};

struct RunSettings {
    Variant variant = Variant::III;
    std::uint64_t seed = 1;
    double soc0 = 0.5;
    std::vector<int> initial_states;  // empty: all units online
    int steps = -1;                   // EMS steps to run; -1 = as many as the data allows
    ScenarioParams scenario;
    int n_lags = 6;
    std::vector<double> tau = default_tau_grid();
    int neighbors = 30;
    Weights weights;
    MipLimits limits;
    ValidationSettings validation;
    int threads = 0;  // 0: EMS_THREADS or 1
    /// Called with every built model before it is solved.
    std::function<void(int step, const MilpModel&)> on_model;
};

struct AppliedAction {
    std::vector<int> gt_states;
    std::vector<int> startups;
    std::vector<double> gt_powers;
    std::vector<double> droops;
    double p_ch = 0.0;
    double p_dis = 0.0;
    double d_b = 0.0;
    double m_b = 0.0;
    int config = 0;
};

enum class StepStatus { ok, limit, infeasible };

struct StepRecord {
    int step = 0;
    TimePoint time{};
    double xi0 = 0.0;
    NetLoadForecast forecast;
    int n_scenarios = 0;
    std::uint64_t scenario_seed = 0;
    std::vector<double> max_perturbation;  // per period k, pu
    ModelInputs inputs;                     // exactly what the model was built from
    StepStatus status = StepStatus::ok;
    MipResult solve;                        // incumbent vector dropped after extraction
    EmsDecision decision;
    AppliedAction applied;
    double soc_before = 0.0;
    double soc_after = 0.0;
    bool energy_bound_exceeded = false;     // nu (M_b + D_b T) > lambda soc_after
    SystemResponse response;                // applied M and D totals
    double required_damping = 0.0;          // for max_perturbation[0]
    double required_inertia = 0.0;
    EnergyDeviationBound energy;            // at soc_before
    bool validated = false;                 // swing simulation ran
    std::string validation_error;
    SwingTrace trace;
    BoundsReport bounds;
};

enum class RunStatus { completed, infeasible, limit };

struct KpiReport {
    double fuel_consumption = 0.0;  // cost units
    double operating_cost = 0.0;    // fuel + start-up costs
    double gt_hours = 0.0;
    int gt_startups = 0;
    double ess_degradation = 0.0;   // equivalent full cycles
    int bound_violations = 0;
};

struct EmsRun {
    Variant variant = Variant::III;
    std::uint64_t seed = 0;
    RunStatus status = RunStatus::completed;
    std::vector<StepRecord> steps;
    std::vector<std::string> diagnostics;
    KpiReport kpis;
    double total_objective() const;
};

std::string to_string(RunStatus s);
std::string to_string(StepStatus s);

/// Runs the receding-horizon loop. Estimators are fitted on `history`; step s
/// measures xi_0 from realized[s] using the lags ending there.
EmsRun run_rolling_horizon(const System& sys, const SeriesPair& history, const SeriesPair& realized,
                           const RunSettings& settings);

KpiReport compute_kpis(const System& sys, const EmsRun& run);

/// nu (M_b + D_b T) > lambda soc_after, with a 1e-9 slack.
bool exceeds_energy_bound(const System& sys, const StepRecord& rec);

struct SecurityRecheck {
    int damping_violations = 0;
    int inertia_violations = 0;
    int offline_power_violations = 0;
    double max_offline_power = 0.0;
    bool ok() const { return damping_violations + inertia_violations + offline_power_violations == 0; }
};
/// Re-derives Dmin/Mmin for every period of every decision from the stored
/// perturbation maxima and checks the aggregated allocation.
SecurityRecheck recheck_security(const System& sys, const EmsRun& run);

/// Names of row groups whose removal makes the model feasible (relaxation
/// first, then a node-limited MIP).
std::vector<std::string> diagnose_infeasibility(const MilpModel& model, const MipLimits& limits);

struct VariantComparison {
    EmsRun runs[3];                            // I, II, III
    /// Objectives of the three variants built on variant III's inputs at each
    /// of its steps (identical xi, scenarios, SoC and states).
    std::vector<std::array<double, 3>> nested_objectives;
    KpiReport kpi_delta_ii;                    // II - I
    KpiReport kpi_delta_iii;                   // III - I
};
VariantComparison compare_variants(const System& sys, const SeriesPair& history, const SeriesPair& realized,
                                   RunSettings settings);

// Output writers
void write_schedule_csv(const std::filesystem::path& path, const System& sys, const EmsRun& run);
void write_kpi_json(const std::filesystem::path& path, const EmsRun& run);
void write_traces(const std::filesystem::path& dir, const EmsRun& run);
void write_variants_csv(const std::filesystem::path& path, const VariantComparison& cmp);

}  // namespace apsems
