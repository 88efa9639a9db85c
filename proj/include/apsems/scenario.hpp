#pragma once

// Scenario approach: sample count for the chance-constrained program, drawing
// of net-load multi-samples and the perturbation magnitudes that enter the
// robust frequency constraints.

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <vector>

#include "apsems/forecast.hpp"

namespace apsems {

struct ScenarioParams {
    double epsilon = 0.1;
    double beta = 1e-4;
    double expansion_e = std::numbers::e;
    std::optional<int> n_override;
};

/// Throws ConfigError on out-of-range parameters.
void validate(const ScenarioParams& p);

/// Smallest N with N >= (1/eps) * e/(e-1) * (ln(1/beta) + 4K - 1).
int scenario_count(const ScenarioParams& p, int horizon);
/// The bound itself, before rounding up.
double scenario_bound(const ScenarioParams& p, int horizon);

/// N x K net-load samples. Index convention: samples[i][k] is delta^i at lead
/// k+1 and perturbations[i][k] = |xi[k] - samples[i][k]| pairs the mean net
/// load of step k with the sampled net load of the following step.
struct ScenarioSet {
    std::vector<std::vector<double>> samples;        // pu
    std::vector<std::vector<double>> perturbations;  // pu, >= 0
    std::uint64_t seed = 0;

    int count() const noexcept { return static_cast<int>(samples.size()); }
    int horizon() const noexcept { return samples.empty() ? 0 : static_cast<int>(samples.front().size()); }
};

/// Per-scenario generator seed derived from the run seed.
std::uint64_t scenario_seed(std::uint64_t run_seed, std::uint64_t index);

/// Maps a 64-bit draw into the open interval (0, 1).
double to_unit_open(std::uint64_t bits);

/// Draws n multi-samples; each uses 2K uniforms (load then renewable per
/// lead). Sampling may be split over threads (EMS_THREADS) without changing
/// the result.
ScenarioSet draw_scenarios(const NetLoadForecast& fc, int n, std::uint64_t seed, int threads = 0);

/// Recomputes the perturbation array from xi and samples.
std::vector<std::vector<double>> perturbations_from(const std::vector<double>& xi,
                                                    const std::vector<std::vector<double>>& samples);

/// max_i perturbations[i][k].
double worst_case_perturbation(const ScenarioSet& set, int k);
/// max over all i, k.
double worst_case_perturbation(const ScenarioSet& set);

/// `scenario,k,delta_pu,perturbation_pu`; row k holds samples[i][k] and
/// perturbations[i][k].
void write_scenarios_csv(const std::filesystem::path& path, const ScenarioSet& set);
ScenarioSet read_scenarios_csv(const std::filesystem::path& path);

/// Thread cap from the EMS_THREADS environment variable (>= 1).
int env_thread_cap();

}  // namespace apsems
