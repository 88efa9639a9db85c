#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <set>

#include "apsems/errors.hpp"
#include "apsems/solver.hpp"
#include "lp_simplex.hpp"

namespace apsems {

std::string to_string(LpStatus s) {
    switch (s) {
        case LpStatus::optimal: return "optimal";
        case LpStatus::infeasible: return "infeasible";
        case LpStatus::unbounded: return "unbounded";
    }
    return "?";
}

std::string to_string(MipStatus s) {
    switch (s) {
        case MipStatus::optimal: return "optimal";
        case MipStatus::infeasible: return "infeasible";
        case MipStatus::limit: return "limit";
    }
    return "?";
}

namespace {

using detail::Simplex;
using detail::SimplexStatus;

struct Fix {
    int var;
    double lo;
    double hi;
};

struct Node {
    long id = 0;
    double key = 0.0;  // lower bound inherited from the parent
    std::vector<Fix> fixes;  // all bound changes from the root
    std::size_t inherited = 0;  // leading fixes already applied in `warm`
    std::shared_ptr<Simplex> warm;
};

struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
        if (a.key != b.key) return a.key < b.key;
        return a.id < b.id;
    }
};

}  // namespace

MipResult solve_mip(const MilpModel& model, const MipLimits& limits) {
    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - t0).count(); };

    model.validate();
    const MilpModel reduced = detail::presolve_for_mip(model);
    const auto lp = detail::LpProblem::from_model(reduced);
    const int n = model.num_vars();

    std::vector<int> binaries;
    for (int j = 0; j < n; ++j) {
        if (model.variables[static_cast<std::size_t>(j)].type == VarType::binary) binaries.push_back(j);
    }
    std::vector<int> sos_of(static_cast<std::size_t>(n), -1);
    for (std::size_t s = 0; s < model.sos1_sets.size(); ++s) {
        for (int m : model.sos1_sets[s].members) sos_of[static_cast<std::size_t>(m)] = static_cast<int>(s);
    }

    MipResult res;
    double incumbent_obj = std::numeric_limits<double>::infinity();
    auto prune_level = [&] {
        return incumbent_obj - limits.relative_gap * std::max(1.0, std::abs(incumbent_obj));
    };

    std::size_t cache_bytes = 0;
    std::set<Node, NodeOrder> open;
    long next_id = 0;
    open.insert(Node{next_id++, -std::numeric_limits<double>::infinity(), {}, 0, nullptr});

    auto finish = [&](MipStatus status, double bound) {
        res.status = status;
        res.wall_time = elapsed();
        if (res.has_incumbent()) {
            res.objective = incumbent_obj;
            res.best_bound = std::min(bound, incumbent_obj);
            res.gap = std::max(0.0, (incumbent_obj - res.best_bound) / std::max(1.0, std::abs(incumbent_obj)));
        } else {
            res.best_bound = bound;
        }
        return res;
    };

    auto solve_node = [&](Simplex& s) {
        const long before = s.iterations();
        auto st = s.solve();
        res.lp_iterations += s.iterations() - before;
        return st;
    };

    while (!open.empty()) {
        auto node_handle = open.extract(open.begin());
        Node& node = node_handle.value();
        res.bound_trace.push_back(node.key);
        if (res.has_incumbent() && node.key >= prune_level()) {
            return finish(MipStatus::optimal, node.key);
        }
        if (res.nodes >= limits.max_nodes || elapsed() >= limits.max_seconds) {
            return finish(MipStatus::limit, node.key);
        }
        ++res.nodes;

        std::unique_ptr<Simplex> simplex;
        std::size_t first_fix = 0;
        if (node.warm) {
            if (node.warm.use_count() == 1) {
                simplex = std::make_unique<Simplex>(std::move(*node.warm));
            } else {
                simplex = std::make_unique<Simplex>(*node.warm);
            }
            node.warm.reset();
            first_fix = node.inherited;
        } else {
            simplex = std::make_unique<Simplex>(lp);
        }
        for (std::size_t f = first_fix; f < node.fixes.size(); ++f) {
            simplex->set_bounds(node.fixes[f].var, node.fixes[f].lo, node.fixes[f].hi);
        }
        auto st = solve_node(*simplex);
        if (st == SimplexStatus::iteration_limit && first_fix > 0) {
            simplex = std::make_unique<Simplex>(lp);
            for (const auto& f : node.fixes) simplex->set_bounds(f.var, f.lo, f.hi);
            st = solve_node(*simplex);
        }
        if (st == SimplexStatus::iteration_limit) throw SolverError("simplex failed to converge at node " + std::to_string(node.id));
        if (st == SimplexStatus::unbounded) throw SolverError("LP relaxation is unbounded");
        if (st == SimplexStatus::infeasible) continue;

        const double obj = simplex->objective();
        if (res.has_incumbent() && obj >= prune_level()) continue;
        const auto x = simplex->primal();

        // most fractional binary, ties to the lowest index
        int branch_var = -1;
        double best_frac = limits.integrality_tol;
        for (int j : binaries) {
            const double v = x[static_cast<std::size_t>(j)];
            const double frac = std::min(v - std::floor(v), std::ceil(v) - v);
            if (frac > best_frac) {
                best_frac = frac;
                branch_var = j;
            }
        }
        auto sos_violated = [&](int s) {
            int nonzero = 0;
            for (int m : model.sos1_sets[static_cast<std::size_t>(s)].members) {
                if (std::abs(x[static_cast<std::size_t>(m)]) > limits.integrality_tol) ++nonzero;
            }
            return nonzero > 1;
        };
        int branch_sos = -1;
        if (branch_var >= 0) {
            const int s = sos_of[static_cast<std::size_t>(branch_var)];
            if (s >= 0 && sos_violated(s)) branch_sos = s;
        } else {
            for (std::size_t s = 0; s < model.sos1_sets.size(); ++s) {
                if (sos_violated(static_cast<int>(s))) {
                    branch_sos = static_cast<int>(s);
                    break;
                }
            }
        }

        if (branch_var < 0 && branch_sos < 0) {
            // integral: polish by fixing the binaries and re-solving
            Simplex polish = *simplex;
            for (int j : binaries) {
                const double r = std::round(x[static_cast<std::size_t>(j)]);
                polish.set_bounds(j, r, r);
            }
            std::vector<double> cand = x;
            double cand_obj = obj;
            if (solve_node(polish) == SimplexStatus::optimal) {
                cand = polish.primal();
                cand_obj = polish.objective();
            } else {
                for (int j : binaries) cand[static_cast<std::size_t>(j)] = std::round(cand[static_cast<std::size_t>(j)]);
            }
            if (cand_obj < incumbent_obj) {
                incumbent_obj = cand_obj;
                res.incumbent = std::move(cand);
            }
            continue;
        }

        const double child_key = std::max(obj, node.key);
        std::vector<std::vector<Fix>> branches;
        if (branch_sos >= 0) {
            const auto& set = model.sos1_sets[static_cast<std::size_t>(branch_sos)];
            const int len = static_cast<int>(set.members.size());
            int first = -1;
            int last = -1;
            double wsum = 0.0;
            double vsum = 0.0;
            for (int p = 0; p < len; ++p) {
                const double v = std::abs(x[static_cast<std::size_t>(set.members[static_cast<std::size_t>(p)])]);
                if (v > limits.integrality_tol) {
                    if (first < 0) first = p;
                    last = p;
                }
                wsum += v * p;
                vsum += v;
            }
            const int split = std::clamp(static_cast<int>(std::floor(wsum / vsum)), first, last - 1);
            std::vector<Fix> left;
            std::vector<Fix> right;
            for (int p = 0; p < len; ++p) {
                const int var = set.members[static_cast<std::size_t>(p)];
                (p > split ? left : right).push_back({var, 0.0, 0.0});
            }
            branches.push_back(std::move(left));
            branches.push_back(std::move(right));
        } else {
            branches.push_back({{branch_var, 0.0, 0.0}});
            branches.push_back({{branch_var, 1.0, 1.0}});
        }

        std::shared_ptr<Simplex> shared;
        const std::size_t bytes = simplex->memory_bytes();
        if (cache_bytes + bytes <= limits.warm_start_bytes) {
            cache_bytes += bytes;
            shared = std::shared_ptr<Simplex>(simplex.release(), [&cache_bytes, bytes](Simplex* p) {
                cache_bytes -= bytes;
                delete p;
            });
        }
        for (auto& extra : branches) {
            Node child;
            child.id = next_id++;
            child.key = child_key;
            child.fixes = node.fixes;
            child.inherited = node.fixes.size();
            child.fixes.insert(child.fixes.end(), extra.begin(), extra.end());
            child.warm = shared;
            open.insert(std::move(child));
        }
    }
    return finish(res.has_incumbent() ? MipStatus::optimal : MipStatus::infeasible, incumbent_obj);
}

}  // namespace apsems
