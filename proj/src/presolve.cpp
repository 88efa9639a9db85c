#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "lp_simplex.hpp"

namespace apsems::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Row in `lo <= a x <= hi` form.
struct RangeRow {
    std::string name;
    std::vector<Term> terms;
    double lo;
    double hi;
};

/// Tightens `terms <= rhs` in place; returns the new rhs.
double tighten_le(std::vector<Term>& terms, double rhs, const MilpModel& m) {
    for (std::size_t k = 0; k < terms.size(); ++k) {
        const auto& v = m.variables[static_cast<std::size_t>(terms[k].var)];
        if (v.type != VarType::binary || v.lower != 0.0 || v.upper != 1.0) continue;
        // max activity of the other terms
        double rest = 0.0;
        for (std::size_t q = 0; q < terms.size() && std::isfinite(rest); ++q) {
            if (q == k) continue;
            const auto& w = m.variables[static_cast<std::size_t>(terms[q].var)];
            rest += terms[q].coef > 0.0 ? terms[q].coef * w.upper : terms[q].coef * w.lower;
        }
        if (!std::isfinite(rest)) continue;
        double& a = terms[k].coef;
        const double tol = 1e-9 * std::max(1.0, std::abs(rhs));
        if (a > 0.0) {
            const double d = rhs - rest;  // slack of the row when b = 0
            if (d > tol) {
                a -= d;
                rhs -= d;
            }
        } else if (a < 0.0) {
            const double d = rhs - (rest + a);  // slack when b = 1
            if (d > tol) a += d;
        }
    }
    std::erase_if(terms, [](const Term& t) { return t.coef == 0.0; });
    return rhs;
}

}  // namespace

MilpModel presolve_for_mip(const MilpModel& model) {
    // 1. merge rows with identical scaled coefficients
    using Key = std::vector<std::pair<int, double>>;
    std::map<Key, std::size_t> slot;
    std::vector<RangeRow> rows;
    for (const auto& c : model.constraints) {
        double scale = 0.0;
        for (const auto& t : c.terms) scale = std::max(scale, std::abs(t.coef));
        if (scale == 0.0) {
            rows.push_back({c.name, {}, c.sense == Sense::le ? -kInf : c.rhs, c.sense == Sense::ge ? kInf : c.rhs});
            continue;
        }
        Key key;
        for (const auto& t : c.terms) key.emplace_back(t.var, t.coef / scale);
        std::sort(key.begin(), key.end());
        const double lo = c.sense == Sense::le ? -kInf : c.rhs / scale;
        const double hi = c.sense == Sense::ge ? kInf : c.rhs / scale;
        const auto [it, fresh] = slot.try_emplace(key, rows.size());
        if (fresh) {
            RangeRow r{c.name, {}, lo, hi};
            for (const auto& [j, v] : key) r.terms.push_back({j, v});
            rows.push_back(std::move(r));
        } else {
            auto& r = rows[it->second];
            r.lo = std::max(r.lo, lo);
            r.hi = std::min(r.hi, hi);
        }
    }

    // 2. emit as single-sided rows, tightening binary coefficients
    MilpModel out;
    out.name = model.name;
    out.variables = model.variables;
    out.sos1_sets = model.sos1_sets;
    out.objective = model.objective;
    out.objective_offset = model.objective_offset;
    for (auto& r : rows) {
        if (r.lo == r.hi || r.terms.empty()) {
            out.constraints.push_back({r.name, r.terms, Sense::eq, r.lo});
            if (r.terms.empty() && r.lo != r.hi) {
                out.constraints.back().sense = std::isfinite(r.hi) ? Sense::le : Sense::ge;
                out.constraints.back().rhs = std::isfinite(r.hi) ? r.hi : r.lo;
            }
            continue;
        }
        if (std::isfinite(r.hi)) {
            auto terms = r.terms;
            const double rhs = tighten_le(terms, r.hi, model);
            out.constraints.push_back({r.name, std::move(terms), Sense::le, rhs});
        }
        if (std::isfinite(r.lo)) {
            std::vector<Term> neg = r.terms;
            for (auto& t : neg) t.coef = -t.coef;
            const double rhs = tighten_le(neg, -r.lo, model);
            for (auto& t : neg) t.coef = -t.coef;
            out.constraints.push_back({r.name + "_lo", std::move(neg), Sense::ge, -rhs});
        }
    }
    return out;
}

}  // namespace apsems::detail
