#pragma once

// LP relaxations by dense bounded-variable simplex, best-first
// branch-and-bound over binaries (SOS1 aware), and free-format MPS I/O.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "apsems/milp_model.hpp"

namespace apsems {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    std::vector<double> x;
    double objective = 0.0;
    std::vector<int> basis;  // basic variables; index >= num_vars denotes a row logical
    long iterations = 0;
};

/// Solves the continuous relaxation (binaries in [lower, upper]). Throws
/// SolverError when the simplex fails to converge numerically.
LpSolution solve_lp(const MilpModel& model);

enum class MipStatus { optimal, infeasible, limit };

struct MipLimits {
    long max_nodes = 1'000'000;
    double max_seconds = 600.0;
    double relative_gap = 1e-6;
    double integrality_tol = 1e-6;
    std::size_t warm_start_bytes = 512u << 20;  // cap on cached parent tableaux
};

struct MipResult {
    MipStatus status = MipStatus::infeasible;
    std::vector<double> incumbent;  // empty when none was found
    double objective = 0.0;
    double best_bound = 0.0;
    double gap = 0.0;  // (objective - bound) / max(1, |objective|)
    long nodes = 0;
    double wall_time = 0.0;
    long lp_iterations = 0;
    /// Global lower bound recorded at each node selection.
    std::vector<double> bound_trace;

    bool has_incumbent() const noexcept { return !incumbent.empty(); }
};

MipResult solve_mip(const MilpModel& model, const MipLimits& limits = {});

std::string to_string(LpStatus s);
std::string to_string(MipStatus s);

/// Free-format MPS with integer markers, a BOUNDS section and an SOS section.
void write_mps(const MilpModel& model, std::ostream& out);
void write_mps(const MilpModel& model, const std::filesystem::path& path);
/// Throws ParseError (with line number) on malformed input.
MilpModel read_mps(std::istream& in);
MilpModel read_mps(const std::filesystem::path& path);

}  // namespace apsems
