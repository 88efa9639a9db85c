#pragma once

// Shared helpers for the test suites: a seeded input generator, small systems
// and brute-force oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <vector>

#include "apsems/core_types.hpp"
#include "apsems/ems_builder.hpp"
#include "apsems/milp_model.hpp"
#include "apsems/solver.hpp"

namespace testing {

inline std::filesystem::path fixture(const char* name) { return std::filesystem::path(APSEMS_FIXTURES) / name; }

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }
    std::uint64_t bits() { return rng_(); }

    std::vector<double> vec(std::size_t n, double lo, double hi) {
        std::vector<double> v(n);
        for (auto& x : v) x = uniform(lo, hi);
        return v;
    }

private:
    std::mt19937_64 rng_;
};

inline apsems::GeneratorSpec make_gt(double p_min, double p_max, double inertia, double fuel_b) {
    apsems::GeneratorSpec g;
    g.name = "GT";
    g.inertia_m = inertia;
    g.p_min = p_min;
    g.p_max = p_max;
    g.p_opt = 0.8 * p_max;
    g.droop_min = 1.0;
    g.default_droop = 1.0;
    g.droop_max = 4.0;
    g.fuel_a = 20.0;
    g.fuel_b = fuel_b;
    g.startup_cost = 50.0;
    return g;
}

inline apsems::EssSpec make_ess() {
    apsems::EssSpec e;
    e.p_max = 0.5;
    e.e_max = 40.0;
    e.soc_min = 0.1;
    e.soc_max = 0.95;
    e.lambda = 0.03;
    e.vinertia_max = 5.0;
    e.vdroop_max = 12.0;
    return e;
}

inline apsems::GridSpec make_grid() {
    apsems::GridSpec g;
    g.s_base = 20.0;
    g.r_ss = 0.03;
    g.r_tr = 0.05;
    g.rocof_max = 0.1;
    return g;
}

/// Ng identical-ish units on the 20 MVA fixture grid.
inline apsems::System small_system(int n_g, int k_steps, Gen* gen = nullptr) {
    std::vector<apsems::GeneratorSpec> gens;
    for (int g = 0; g < n_g; ++g) {
        double p_max = 0.5, inertia = 1.5, fuel_b = 1600.0 + 50.0 * g;
        if (gen) {
            p_max = gen->uniform(0.35, 0.6);
            inertia = gen->uniform(1.0, 2.0);
            fuel_b = gen->uniform(1400.0, 1900.0);
        }
        auto spec = make_gt(0.2 * p_max, p_max, inertia, fuel_b);
        if (gen) {
            spec.fuel_a = gen->uniform(10.0, 80.0);
            spec.startup_cost = gen->uniform(20.0, 200.0);
        }
        gens.push_back(spec);
    }
    return apsems::validate_system(gens, make_ess(), make_grid(), {900.0, k_steps});
}

/// Fixes every binary of `model` to `values` (same order as binary_indices).
inline apsems::MilpModel fix_binaries(apsems::MilpModel model, const std::vector<int>& idx,
                                      const std::vector<int>& values) {
    for (std::size_t i = 0; i < idx.size(); ++i) {
        auto& v = model.variables[static_cast<std::size_t>(idx[i])];
        v.lower = v.upper = values[i];
    }
    return model;
}

inline std::vector<int> binary_indices(const apsems::MilpModel& model) {
    std::vector<int> idx;
    for (int j = 0; j < model.num_vars(); ++j) {
        if (model.variables[static_cast<std::size_t>(j)].type == apsems::VarType::binary) idx.push_back(j);
    }
    return idx;
}

/// Minimum over all 2^n binary assignments that respect the SOS1 sets, each
/// solved as an LP. +inf when none is feasible.
inline double enumerate_binaries(const apsems::MilpModel& model) {
    const auto idx = binary_indices(model);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> val(idx.size());
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << idx.size()); ++mask) {
        for (std::size_t i = 0; i < idx.size(); ++i) val[i] = static_cast<int>((mask >> i) & 1U);
        auto fixed = fix_binaries(model, idx, val);
        bool sos_ok = true;
        for (const auto& s : fixed.sos1_sets) {
            int nonzero = 0;
            for (int m : s.members) nonzero += fixed.variables[static_cast<std::size_t>(m)].upper > 0.0 ? 1 : 0;
            // Members that are continuous could still be zero; only fully fixed sets are decided here.
            bool all_bin = std::all_of(s.members.begin(), s.members.end(), [&](int m) {
                return fixed.variables[static_cast<std::size_t>(m)].type == apsems::VarType::binary;
            });
            if (all_bin && nonzero > 1) sos_ok = false;
        }
        if (!sos_ok) continue;
        const auto lp = apsems::solve_lp(fixed);
        if (lp.status == apsems::LpStatus::optimal) best = std::min(best, lp.objective);
    }
    return best;
}

/// Exhaustive search over the commitment model's free binary choices.
/// Start/stop and configuration indicators are implied by x through the
/// binary-only rows (u_on - u_off = x_k - x_{k-1}, u_on + u_off <= 1 and the
/// configuration links), so every other assignment is infeasible before any
/// LP is solved. The oracle enumerates x and s for all periods and fills the
/// implied binaries.
inline double enumerate_commitment(const apsems::MilpModel& model, const apsems::System& sys,
                                   const std::vector<int>& prev_states) {
    const auto lay = apsems::layout_of(model);
    const int n_g = lay.n_g;
    const int k_steps = lay.k_steps;
    const int free_bits = k_steps * (n_g + 1);
    double best = std::numeric_limits<double>::infinity();
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << free_bits); ++mask) {
        apsems::MilpModel m = model;
        auto fix = [&m](int var, int value) {
            auto& v = m.variables[static_cast<std::size_t>(var)];
            v.lower = v.upper = value;
        };
        int bit = 0;
        std::vector<int> prev = prev_states;
        for (int k = 0; k < k_steps; ++k) {
            const auto& p = lay.periods[static_cast<std::size_t>(k)];
            std::vector<int> x(static_cast<std::size_t>(n_g));
            for (int g = 0; g < n_g; ++g) {
                const auto gi = static_cast<std::size_t>(g);
                x[gi] = static_cast<int>((mask >> bit++) & 1U);
                fix(p.x[gi], x[gi]);
                fix(p.u_on[gi], x[gi] > prev[gi] ? 1 : 0);
                fix(p.u_off[gi], x[gi] < prev[gi] ? 1 : 0);
            }
            fix(p.s_dis, static_cast<int>((mask >> bit++) & 1U));
            const auto j = sys.configs().index_of(x);
            for (std::size_t c = 0; c < p.b.size(); ++c) fix(p.b[c], c == j ? 1 : 0);
            prev = x;
        }
        const auto lp = apsems::solve_lp(m);
        if (lp.status == apsems::LpStatus::optimal) best = std::min(best, lp.objective);
    }
    return best;
}

inline bool rel_close(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace testing
