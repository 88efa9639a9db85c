#include "apsems/milp_model.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <fmt/format.h>

#include "apsems/errors.hpp"

namespace apsems {

std::vector<Term> normalize_terms(std::vector<Term> terms) {
    std::vector<Term> out;
    out.reserve(terms.size());
    std::unordered_map<int, std::size_t> slot;
    for (const auto& t : terms) {
        const auto [it, fresh] = slot.try_emplace(t.var, out.size());
        if (fresh) {
            out.push_back(t);
        } else {
            out[it->second].coef += t.coef;
        }
    }
    std::erase_if(out, [](const Term& t) { return t.coef == 0.0; });
    return out;
}

int MilpModel::add_variable(std::string name_, double lower, double upper, VarType type) {
    variables.push_back({std::move(name_), lower, upper, type});
    return num_vars() - 1;
}

int MilpModel::add_constraint(std::string name_, std::vector<Term> terms, Sense sense, double rhs) {
    constraints.push_back({std::move(name_), normalize_terms(std::move(terms)), sense, rhs});
    return num_rows() - 1;
}

void MilpModel::add_sos1(std::string name_, std::vector<int> members) {
    Sos1Set s;
    s.name = std::move(name_);
    s.weights.resize(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) s.weights[i] = static_cast<double>(i + 1);
    s.members = std::move(members);
    sos1_sets.push_back(std::move(s));
}

void MilpModel::set_objective(std::vector<Term> terms) { objective = normalize_terms(std::move(terms)); }

int MilpModel::num_binaries() const {
    return static_cast<int>(
        std::count_if(variables.begin(), variables.end(), [](const Variable& v) { return v.type == VarType::binary; }));
}

int MilpModel::find_variable(const std::string& n) const {
    for (int j = 0; j < num_vars(); ++j) {
        if (variables[static_cast<std::size_t>(j)].name == n) return j;
    }
    return -1;
}

int MilpModel::find_constraint(const std::string& n) const {
    for (int i = 0; i < num_rows(); ++i) {
        if (constraints[static_cast<std::size_t>(i)].name == n) return i;
    }
    return -1;
}

void MilpModel::validate() const {
    std::vector<std::string> issues;
    auto note = [&](std::string s) {
        if (issues.size() < 20) issues.push_back(std::move(s));
    };
    const int n = num_vars();
    for (const auto& v : variables) {
        if (std::isnan(v.lower) || std::isnan(v.upper) || v.lower > v.upper) {
            note(fmt::format("variable {}: lower {} > upper {}", v.name, v.lower, v.upper));
        }
        if (v.type == VarType::binary && !((v.lower == 0.0 || v.lower == 1.0) && (v.upper == 0.0 || v.upper == 1.0))) {
            note(fmt::format("binary {}: bounds must lie in {{0,1}}", v.name));
        }
    }
    std::vector<int> seen(static_cast<std::size_t>(n), -1);
    auto check_terms = [&](const std::vector<Term>& terms, const std::string& where, int stamp) {
        for (const auto& t : terms) {
            if (t.var < 0 || t.var >= n) {
                note(fmt::format("{}: unknown variable index {}", where, t.var));
                continue;
            }
            if (!std::isfinite(t.coef)) note(fmt::format("{}: non-finite coefficient", where));
            auto& s = seen[static_cast<std::size_t>(t.var)];
            if (s == stamp) note(fmt::format("{}: duplicate term for {}", where, variables[static_cast<std::size_t>(t.var)].name));
            s = stamp;
        }
    };
    check_terms(objective, "objective", num_rows());
    for (int i = 0; i < num_rows(); ++i) {
        const auto& c = constraints[static_cast<std::size_t>(i)];
        check_terms(c.terms, "row " + c.name, i);
        if (!std::isfinite(c.rhs)) note(fmt::format("row {}: non-finite rhs", c.name));
    }
    for (const auto& s : sos1_sets) {
        if (s.members.size() < 2) note(fmt::format("sos {}: fewer than 2 members", s.name));
        if (s.weights.size() != s.members.size()) note(fmt::format("sos {}: weight count mismatch", s.name));
        for (std::size_t i = 1; i < s.weights.size(); ++i) {
            if (!(s.weights[i] > s.weights[i - 1])) note(fmt::format("sos {}: weights not increasing", s.name));
        }
        for (int m : s.members) {
            if (m < 0 || m >= n) note(fmt::format("sos {}: unknown variable index {}", s.name, m));
        }
    }
    if (!issues.empty()) {
        std::string msg = "malformed model:";
        for (const auto& s : issues) msg += "\n  " + s;
        throw BuildError(msg);
    }
}

double MilpModel::objective_value(const std::vector<double>& x) const {
    double z = objective_offset;
    for (const auto& t : objective) z += t.coef * x[static_cast<std::size_t>(t.var)];
    return z;
}

double MilpModel::activity(int row, const std::vector<double>& x) const {
    double a = 0.0;
    for (const auto& t : constraints[static_cast<std::size_t>(row)].terms) a += t.coef * x[static_cast<std::size_t>(t.var)];
    return a;
}

double MilpModel::row_violation(int row, const std::vector<double>& x) const {
    const auto& c = constraints[static_cast<std::size_t>(row)];
    const double a = activity(row, x);
    switch (c.sense) {
        case Sense::le: return std::max(0.0, a - c.rhs);
        case Sense::ge: return std::max(0.0, c.rhs - a);
        case Sense::eq: return std::abs(a - c.rhs);
    }
    return 0.0;
}

double MilpModel::max_violation(const std::vector<double>& x) const {
    double worst = 0.0;
    for (int i = 0; i < num_rows(); ++i) worst = std::max(worst, row_violation(i, x));
    for (int j = 0; j < num_vars(); ++j) {
        const auto& v = variables[static_cast<std::size_t>(j)];
        const double xj = x[static_cast<std::size_t>(j)];
        worst = std::max({worst, v.lower - xj, xj - v.upper});
    }
    return worst;
}

}  // namespace apsems
