#pragma once

// Dense bounded-variable simplex on a condensed (Tucker) tableau.
//
// Every row i gets a logical r_i = a_i x bounded by the row sense, so the
// system is r = A x with all n + m variables boxed (infinite bounds allowed).
// The tableau stores the basic variables as a linear function of the
// nonbasic ones; its last row holds the objective, i.e. the reduced costs.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "apsems/milp_model.hpp"

namespace apsems::detail {

/// Dense, row-scaled LP. Rows with identical coefficient vectors are merged
/// into one row carrying the intersection of their bounds.
struct LpProblem {
    int n = 0;
    int m = 0;
    Eigen::MatrixXd a;  // m x n, rows scaled to unit max-norm
    std::vector<double> row_lo, row_hi;
    std::vector<double> col_lo, col_hi;
    std::vector<double> cost;
    double offset = 0.0;
    bool trivially_infeasible = false;  // merged bounds crossed or empty row infeasible

    static LpProblem from_model(const MilpModel& model);
};

enum class SimplexStatus { optimal, infeasible, unbounded, iteration_limit };

class Simplex {
public:
    explicit Simplex(const LpProblem& lp);

    /// Changes a structural bound. A nonbasic variable moves with its bound so
    /// dual feasibility is kept when the new interval is a point.
    void set_bounds(int j, double lo, double hi);
    double lower(int j) const { return lo_[static_cast<std::size_t>(j)]; }
    double upper(int j) const { return hi_[static_cast<std::size_t>(j)]; }

    /// Dual simplex when the current basis is dual feasible, primal otherwise,
    /// followed by a primal clean-up pass.
    SimplexStatus solve();

    std::vector<double> primal() const;
    double objective() const;
    std::vector<int> basis() const { return basic_; }
    long iterations() const noexcept { return iterations_; }
    std::size_t memory_bytes() const;

private:
    enum class Mode { dantzig, bland };

    SimplexStatus primal_simplex();
    SimplexStatus dual_simplex();
    bool dual_feasible() const;
    void pivot(int r, int s);
    void recompute_basics();
    /// Rebuilds the tableau from the original matrix for the current basis.
    bool refactor();
    double infeasibility(std::size_t var) const;
    double primal_infeasibility_sum() const;
    void place_nonbasic(std::size_t var);

    const LpProblem* lp_;
    int n_;
    int m_;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> t_;  // (m+1) x n
    std::vector<double> lo_, hi_, val_;
    std::vector<int> basic_;     // var in row i
    std::vector<int> nonbasic_;  // var in column j
    std::vector<int> pos_;       // row i >= 0 when basic, -(j + 1) when nonbasic in column j
    long iterations_ = 0;
    long pivots_since_refactor_ = 0;
};

/// Integer-preserving row reductions applied before branch-and-bound:
/// rows with identical (scaled) coefficients are merged keeping the tightest
/// bounds, then coefficients of binaries in inequality rows are tightened
/// wherever a big-M term exceeds what the other variables' bounds can reach.
/// The set of integer-feasible points and the objective are unchanged.
MilpModel presolve_for_mip(const MilpModel& model);

}  // namespace apsems::detail
