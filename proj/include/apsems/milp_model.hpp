#pragma once

// Solver-independent mixed-binary linear program (minimisation).

#include <map>
#include <string>
#include <vector>

namespace apsems {

enum class VarType { continuous, binary };
enum class Sense { le, eq, ge };

struct Variable {
    std::string name;
    double lower = 0.0;
    double upper = 0.0;
    VarType type = VarType::continuous;
};

struct Term {
    int var = 0;
    double coef = 0.0;

    friend bool operator==(const Term&, const Term&) = default;
};

struct Constraint {
    std::string name;
    std::vector<Term> terms;
    Sense sense = Sense::le;
    double rhs = 0.0;
};

struct Sos1Set {
    std::string name;
    std::vector<int> members;
    std::vector<double> weights;  // strictly increasing, same length as members
};

class MilpModel {
public:
    std::string name = "model";
    std::vector<Variable> variables;
    std::vector<Constraint> constraints;
    std::vector<Sos1Set> sos1_sets;
    std::vector<Term> objective;
    double objective_offset = 0.0;

    /// Named index maps filled by model builders, e.g. "P_gt" -> indices by
    /// (step, unit). Not part of the mathematical model.
    std::map<std::string, std::vector<int>> var_groups;
    std::map<std::string, std::vector<int>> row_groups;

    int add_variable(std::string name, double lower, double upper, VarType type = VarType::continuous);
    int add_binary(std::string name) { return add_variable(std::move(name), 0.0, 1.0, VarType::binary); }
    /// Duplicate variables in `terms` are summed; zero coefficients dropped.
    int add_constraint(std::string name, std::vector<Term> terms, Sense sense, double rhs);
    void add_sos1(std::string name, std::vector<int> members);
    void set_objective(std::vector<Term> terms);

    int num_vars() const noexcept { return static_cast<int>(variables.size()); }
    int num_rows() const noexcept { return static_cast<int>(constraints.size()); }
    int num_binaries() const;

    /// Index of a variable by name; -1 when absent.
    int find_variable(const std::string& name) const;
    int find_constraint(const std::string& name) const;

    /// Structural checks: known indices, no duplicate terms, binary bounds in
    /// {0,1}, lower <= upper, SOS1 groups of size >= 2 with increasing weights.
    /// Throws BuildError listing the first problems found.
    void validate() const;

    double objective_value(const std::vector<double>& x) const;
    double activity(int row, const std::vector<double>& x) const;
    /// Amount by which row `row` is violated at x (0 when satisfied).
    double row_violation(int row, const std::vector<double>& x) const;
    /// Max violation over rows and variable bounds.
    double max_violation(const std::vector<double>& x) const;
};

/// Sums duplicate variables and drops zero coefficients, keeping first-seen order.
std::vector<Term> normalize_terms(std::vector<Term> terms);

}  // namespace apsems
