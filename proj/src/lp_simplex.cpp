#include "lp_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "apsems/errors.hpp"
#include "apsems/solver.hpp"

namespace apsems::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasTol = 1e-9;
constexpr double kDualTol = 1e-9;
constexpr double kPivotTol = 1e-9;
constexpr int kStallLimit = 50;
constexpr long kRecomputeEvery = 100;

}  // namespace

LpProblem LpProblem::from_model(const MilpModel& model) {
    LpProblem lp;
    lp.n = model.num_vars();
    lp.offset = model.objective_offset;
    lp.col_lo.resize(static_cast<std::size_t>(lp.n));
    lp.col_hi.resize(static_cast<std::size_t>(lp.n));
    lp.cost.assign(static_cast<std::size_t>(lp.n), 0.0);
    for (int j = 0; j < lp.n; ++j) {
        lp.col_lo[static_cast<std::size_t>(j)] = model.variables[static_cast<std::size_t>(j)].lower;
        lp.col_hi[static_cast<std::size_t>(j)] = model.variables[static_cast<std::size_t>(j)].upper;
    }
    for (const auto& t : model.objective) lp.cost[static_cast<std::size_t>(t.var)] += t.coef;

    using Key = std::vector<std::pair<int, double>>;
    std::map<Key, int> slot;
    std::vector<Key> rows;
    for (const auto& c : model.constraints) {
        double lo = c.sense == Sense::le ? -kInf : c.rhs;
        double hi = c.sense == Sense::ge ? kInf : c.rhs;
        double scale = 0.0;
        for (const auto& t : c.terms) scale = std::max(scale, std::abs(t.coef));
        if (scale == 0.0) {
            if (lo > kFeasTol || hi < -kFeasTol) lp.trivially_infeasible = true;
            continue;
        }
        Key key;
        key.reserve(c.terms.size());
        for (const auto& t : c.terms) key.emplace_back(t.var, t.coef / scale);
        std::sort(key.begin(), key.end());
        lo /= scale;
        hi /= scale;
        const auto [it, fresh] = slot.try_emplace(key, static_cast<int>(rows.size()));
        if (fresh) {
            rows.push_back(std::move(key));
            lp.row_lo.push_back(lo);
            lp.row_hi.push_back(hi);
        } else {
            auto& rl = lp.row_lo[static_cast<std::size_t>(it->second)];
            auto& rh = lp.row_hi[static_cast<std::size_t>(it->second)];
            rl = std::max(rl, lo);
            rh = std::min(rh, hi);
        }
    }
    lp.m = static_cast<int>(rows.size());
    lp.a = Eigen::MatrixXd::Zero(lp.m, lp.n);
    for (int i = 0; i < lp.m; ++i) {
        for (const auto& [j, v] : rows[static_cast<std::size_t>(i)]) lp.a(i, j) = v;
        auto& rl = lp.row_lo[static_cast<std::size_t>(i)];
        auto& rh = lp.row_hi[static_cast<std::size_t>(i)];
        if (rl > rh + kFeasTol) lp.trivially_infeasible = true;
        if (rl > rh) rl = rh;
    }
    for (int j = 0; j < lp.n; ++j) {
        if (lp.col_lo[static_cast<std::size_t>(j)] > lp.col_hi[static_cast<std::size_t>(j)]) lp.trivially_infeasible = true;
    }
    return lp;
}

Simplex::Simplex(const LpProblem& lp) : lp_(&lp), n_(lp.n), m_(lp.m) {
    const auto total = static_cast<std::size_t>(n_ + m_);
    t_.resize(m_ + 1, n_);
    t_.topRows(m_) = lp.a;
    for (int j = 0; j < n_; ++j) t_(m_, j) = lp.cost[static_cast<std::size_t>(j)];
    lo_.resize(total);
    hi_.resize(total);
    val_.assign(total, 0.0);
    pos_.resize(total);
    for (int j = 0; j < n_; ++j) {
        const auto u = static_cast<std::size_t>(j);
        lo_[u] = lp.col_lo[u];
        hi_[u] = lp.col_hi[u];
        const bool prefer_upper = lp.cost[u] < 0.0;
        if (prefer_upper && std::isfinite(hi_[u])) {
            val_[u] = hi_[u];
        } else if (std::isfinite(lo_[u])) {
            val_[u] = lo_[u];
        } else if (std::isfinite(hi_[u])) {
            val_[u] = hi_[u];
        }
        nonbasic_.push_back(j);
        pos_[u] = -(j + 1);
    }
    for (int i = 0; i < m_; ++i) {
        const auto v = static_cast<std::size_t>(n_ + i);
        lo_[v] = lp.row_lo[static_cast<std::size_t>(i)];
        hi_[v] = lp.row_hi[static_cast<std::size_t>(i)];
        basic_.push_back(n_ + i);
        pos_[v] = i;
    }
    recompute_basics();
}

std::size_t Simplex::memory_bytes() const {
    return static_cast<std::size_t>(t_.size()) * sizeof(double) + (lo_.size() * 3) * sizeof(double) +
           (basic_.size() + nonbasic_.size() + pos_.size()) * sizeof(int) + sizeof(*this);
}

void Simplex::set_bounds(int j, double lo, double hi) {
    const auto u = static_cast<std::size_t>(j);
    const double old = val_[u];
    const bool at_lo = old == lo_[u];
    const bool at_hi = old == hi_[u];
    lo_[u] = lo;
    hi_[u] = hi;
    const int p = pos_[u];
    if (p >= 0) return;  // basic: the dual simplex repairs any violation
    double nv = old;
    if (lo == hi) {
        nv = lo;
    } else if (at_lo && std::isfinite(lo)) {
        nv = lo;
    } else if (at_hi && std::isfinite(hi)) {
        nv = hi;
    } else {
        nv = std::clamp(old, lo, hi);
    }
    const double delta = nv - old;
    if (delta == 0.0) return;
    val_[u] = nv;
    const int col = -p - 1;
    for (int i = 0; i < m_; ++i) val_[static_cast<std::size_t>(basic_[static_cast<std::size_t>(i)])] += t_(i, col) * delta;
}

void Simplex::recompute_basics() {
    Eigen::VectorXd vn(n_);
    for (int j = 0; j < n_; ++j) vn(j) = val_[static_cast<std::size_t>(nonbasic_[static_cast<std::size_t>(j)])];
    const Eigen::VectorXd vb = t_.topRows(m_) * vn;
    for (int i = 0; i < m_; ++i) val_[static_cast<std::size_t>(basic_[static_cast<std::size_t>(i)])] = vb(i);
    pivots_since_refactor_ = 0;
}

bool Simplex::refactor() {
    // Basic columns of [A, -I]; tableau = -B^{-1} N.
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m_, m_);
    Eigen::MatrixXd nmat = Eigen::MatrixXd::Zero(m_, n_);
    auto column = [&](int var, auto&& dst) {
        if (var < n_) {
            dst = lp_->a.col(var);
        } else {
            dst.setZero();
            dst(var - n_) = -1.0;
        }
    };
    for (int i = 0; i < m_; ++i) column(basic_[static_cast<std::size_t>(i)], b.col(i));
    for (int j = 0; j < n_; ++j) column(nonbasic_[static_cast<std::size_t>(j)], nmat.col(j));
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
    const Eigen::MatrixXd top = -lu.solve(nmat);
    if (!top.allFinite()) return false;
    t_.topRows(m_) = top;
    for (int j = 0; j < n_; ++j) {
        const int v = nonbasic_[static_cast<std::size_t>(j)];
        double d = v < n_ ? lp_->cost[static_cast<std::size_t>(v)] : 0.0;
        for (int i = 0; i < m_; ++i) {
            const int bv = basic_[static_cast<std::size_t>(i)];
            if (bv < n_) d += lp_->cost[static_cast<std::size_t>(bv)] * top(i, j);
        }
        t_(m_, j) = d;
    }
    recompute_basics();
    return true;
}

void Simplex::pivot(int r, int s) {
    const double p = t_(r, s);
    const Eigen::VectorXd col = t_.col(s);
    const Eigen::RowVectorXd row = t_.row(r);
    t_.noalias() -= (col / p) * row;
    t_.col(s) = col / p;
    t_.row(r) = -row / p;
    t_(r, s) = 1.0 / p;
    const int leaving = basic_[static_cast<std::size_t>(r)];
    const int entering = nonbasic_[static_cast<std::size_t>(s)];
    basic_[static_cast<std::size_t>(r)] = entering;
    nonbasic_[static_cast<std::size_t>(s)] = leaving;
    pos_[static_cast<std::size_t>(entering)] = r;
    pos_[static_cast<std::size_t>(leaving)] = -(s + 1);
    ++pivots_since_refactor_;
}

double Simplex::infeasibility(std::size_t var) const {
    return std::max({0.0, lo_[var] - val_[var], val_[var] - hi_[var]});
}

double Simplex::primal_infeasibility_sum() const {
    double s = 0.0;
    for (int v : basic_) s += infeasibility(static_cast<std::size_t>(v));
    return s;
}

bool Simplex::dual_feasible() const {
    for (int j = 0; j < n_; ++j) {
        const auto v = static_cast<std::size_t>(nonbasic_[static_cast<std::size_t>(j)]);
        if (lo_[v] == hi_[v]) continue;
        const double d = t_(m_, j);
        const bool at_lo = val_[v] == lo_[v];
        const bool at_hi = val_[v] == hi_[v];
        if (at_lo && d < -kDualTol) return false;
        if (at_hi && d > kDualTol) return false;
        if (!at_lo && !at_hi && std::abs(d) > kDualTol) return false;
    }
    return true;
}

SimplexStatus Simplex::primal_simplex() {
    const long max_iter = 50L * (n_ + m_) + 1000;
    long local = 0;
    Mode mode = Mode::dantzig;
    int stall = 0;
    Eigen::VectorXd phase1_cost(m_);
    Eigen::RowVectorXd d(n_);

    while (true) {
        if (++local > max_iter) return SimplexStatus::iteration_limit;
        ++iterations_;
        if (pivots_since_refactor_ >= kRecomputeEvery) recompute_basics();

        bool phase1 = false;
        for (int i = 0; i < m_; ++i) {
            const auto v = static_cast<std::size_t>(basic_[static_cast<std::size_t>(i)]);
            double c = 0.0;
            if (val_[v] < lo_[v] - kFeasTol) c = -1.0;
            if (val_[v] > hi_[v] + kFeasTol) c = 1.0;
            phase1_cost(i) = c;
            phase1 = phase1 || c != 0.0;
        }
        if (phase1) {
            d.noalias() = phase1_cost.transpose() * t_.topRows(m_);
        } else {
            d = t_.row(m_);
        }

        // pricing
        int s = -1;
        double best = 0.0;
        double dir = 0.0;
        for (int j = 0; j < n_; ++j) {
            const auto v = static_cast<std::size_t>(nonbasic_[static_cast<std::size_t>(j)]);
            if (lo_[v] == hi_[v]) continue;
            const bool can_up = val_[v] < hi_[v];
            const bool can_down = val_[v] > lo_[v];
            double sigma = 0.0;
            if (can_up && d(j) < -kDualTol) sigma = 1.0;
            if (can_down && d(j) > kDualTol) sigma = -1.0;
            if (sigma == 0.0) continue;
            if (mode == Mode::bland) {
                if (s < 0 || nonbasic_[static_cast<std::size_t>(j)] < nonbasic_[static_cast<std::size_t>(s)]) {
                    s = j;
                    dir = sigma;
                }
            } else if (std::abs(d(j)) > best) {
                best = std::abs(d(j));
                s = j;
                dir = sigma;
            }
        }
        if (s < 0) return phase1 ? SimplexStatus::infeasible : SimplexStatus::optimal;

        const auto ent = static_cast<std::size_t>(nonbasic_[static_cast<std::size_t>(s)]);
        const double range = hi_[ent] - lo_[ent];

        // ratio test, two passes (Harris)
        auto limit = [&](int i, double alpha, double tol, double& target) -> double {
            const auto v = static_cast<std::size_t>(basic_[static_cast<std::size_t>(i)]);
            const double x = val_[v];
            if (phase1 && x < lo_[v] - kFeasTol) {
                if (alpha <= 0.0) return kInf;
                target = lo_[v];
                return (lo_[v] - x + tol) / alpha;
            }
            if (phase1 && x > hi_[v] + kFeasTol) {
                if (alpha >= 0.0) return kInf;
                target = hi_[v];
                return (x - hi_[v] + tol) / -alpha;
            }
            if (alpha > 0.0) {
                if (!std::isfinite(hi_[v])) return kInf;
                target = hi_[v];
                return (hi_[v] - x + tol) / alpha;
            }
            if (!std::isfinite(lo_[v])) return kInf;
            target = lo_[v];
            return (x - lo_[v] + tol) / -alpha;
        };
        const double harris = mode == Mode::bland ? 0.0 : kFeasTol;
        double theta_max = kInf;
        double dummy = 0.0;
        for (int i = 0; i < m_; ++i) {
            const double alpha = t_(i, s) * dir;
            if (std::abs(alpha) <= kPivotTol) continue;
            theta_max = std::min(theta_max, limit(i, alpha, harris, dummy));
        }
        int r = -1;
        double theta = kInf;
        double target = 0.0;
        double best_alpha = 0.0;
        for (int i = 0; i < m_; ++i) {
            const double alpha = t_(i, s) * dir;
            if (std::abs(alpha) <= kPivotTol) continue;
            double tgt = 0.0;
            const double exact = std::max(0.0, limit(i, alpha, 0.0, tgt));
            if (exact > theta_max) continue;
            bool take = false;
            if (mode == Mode::bland) {
                take = r < 0 || exact < theta ||
                       (exact == theta && basic_[static_cast<std::size_t>(i)] < basic_[static_cast<std::size_t>(r)]);
            } else {
                take = std::abs(alpha) > best_alpha;
            }
            if (take) {
                r = i;
                theta = exact;
                target = tgt;
                best_alpha = std::abs(alpha);
            }
        }
        const bool flip = std::isfinite(range) && (r < 0 || range <= theta);
        if (flip) theta = range;
        if (!std::isfinite(theta)) {
            return phase1 ? SimplexStatus::infeasible : SimplexStatus::unbounded;
        }

        const double step = dir * theta;
        val_[ent] += step;
        for (int i = 0; i < m_; ++i) val_[static_cast<std::size_t>(basic_[static_cast<std::size_t>(i)])] += t_(i, s) * step;

        const double gain = theta * std::abs(d(s));
        if (gain <= 1e-12) {
            if (++stall > kStallLimit) mode = Mode::bland;
        } else {
            stall = 0;
            mode = Mode::dantzig;
        }

        if (flip) {
            val_[ent] = dir > 0.0 ? hi_[ent] : lo_[ent];
            continue;
        }
        val_[static_cast<std::size_t>(basic_[static_cast<std::size_t>(r)])] = target;
        pivot(r, s);
    }
}

SimplexStatus Simplex::dual_simplex() {
    const long max_iter = 50L * (n_ + m_) + 1000;
    long local = 0;
    Mode mode = Mode::dantzig;
    int stall = 0;

    while (true) {
        if (++local > max_iter) return SimplexStatus::iteration_limit;
        ++iterations_;
        if (pivots_since_refactor_ >= kRecomputeEvery) recompute_basics();

        // leaving row
        int r = -1;
        double worst = kFeasTol;
        for (int i = 0; i < m_; ++i) {
            const auto v = static_cast<std::size_t>(basic_[static_cast<std::size_t>(i)]);
            const double inf = infeasibility(v);
            if (inf <= kFeasTol) continue;
            if (mode == Mode::bland) {
                if (r < 0 || basic_[static_cast<std::size_t>(i)] < basic_[static_cast<std::size_t>(r)]) r = i;
            } else if (inf > worst) {
                worst = inf;
                r = i;
            }
        }
        if (r < 0) return SimplexStatus::optimal;

        const auto lv = static_cast<std::size_t>(basic_[static_cast<std::size_t>(r)]);
        const double target = val_[lv] < lo_[lv] ? lo_[lv] : hi_[lv];
        const double delta = target - val_[lv];

        auto eligible = [&](int j, double& ratio, double tol) -> bool {
            const auto v = static_cast<std::size_t>(nonbasic_[static_cast<std::size_t>(j)]);
            if (lo_[v] == hi_[v]) return false;
            const double alpha = t_(r, j);
            if (std::abs(alpha) <= kPivotTol) return false;
            const double move = delta / alpha;  // required change of x_j
            if (move > 0.0 && !(val_[v] < hi_[v])) return false;
            if (move < 0.0 && !(val_[v] > lo_[v])) return false;
            const double dj = t_(m_, j);
            // moving x_j up needs d_j >= 0 to stay dual feasible, down needs d_j <= 0
            const double slack = move > 0.0 ? std::max(dj, 0.0) : std::max(-dj, 0.0);
            ratio = (slack + tol) / std::abs(alpha);
            return true;
        };
        const double harris = mode == Mode::bland ? 0.0 : kDualTol;
        double theta_max = kInf;
        for (int j = 0; j < n_; ++j) {
            double ratio = 0.0;
            if (eligible(j, ratio, harris)) theta_max = std::min(theta_max, ratio);
        }
        if (!std::isfinite(theta_max)) return SimplexStatus::infeasible;
        int s = -1;
        double best_alpha = 0.0;
        double best_ratio = kInf;
        for (int j = 0; j < n_; ++j) {
            double ratio = 0.0;
            if (!eligible(j, ratio, 0.0) || ratio > theta_max) continue;
            const double a = std::abs(t_(r, j));
            bool take = false;
            if (mode == Mode::bland) {
                take = s < 0 || ratio < best_ratio ||
                       (ratio == best_ratio && nonbasic_[static_cast<std::size_t>(j)] < nonbasic_[static_cast<std::size_t>(s)]);
            } else {
                take = a > best_alpha;
            }
            if (take) {
                s = j;
                best_alpha = a;
                best_ratio = ratio;
            }
        }
        if (s < 0) return SimplexStatus::infeasible;

        const double step = delta / t_(r, s);
        const auto ent = static_cast<std::size_t>(nonbasic_[static_cast<std::size_t>(s)]);
        val_[ent] += step;
        for (int i = 0; i < m_; ++i) val_[static_cast<std::size_t>(basic_[static_cast<std::size_t>(i)])] += t_(i, s) * step;
        val_[lv] = target;

        const double gain = best_ratio * std::abs(delta);
        if (gain <= 1e-12) {
            if (++stall > kStallLimit) mode = Mode::bland;
        } else {
            stall = 0;
            mode = Mode::dantzig;
        }
        pivot(r, s);
    }
}

SimplexStatus Simplex::solve() {
    if (lp_->trivially_infeasible) return SimplexStatus::infeasible;
    for (int attempt = 0; attempt < 3; ++attempt) {
        if (attempt > 0 && !refactor()) return SimplexStatus::iteration_limit;
        if (dual_feasible()) {
            const auto st = dual_simplex();
            if (st == SimplexStatus::iteration_limit) continue;
            // an infeasible verdict is confirmed by the primal phase 1 below
        }
        const auto st = primal_simplex();
        if (st == SimplexStatus::iteration_limit) continue;
        if (st != SimplexStatus::optimal) return st;

        // residual check against the original rows
        recompute_basics();
        const auto x = primal();
        double worst = 0.0;
        for (int j = 0; j < n_; ++j) worst = std::max(worst, infeasibility(static_cast<std::size_t>(j)));
        const Eigen::Map<const Eigen::VectorXd> xv(x.data(), n_);
        const Eigen::VectorXd act = lp_->a * xv;
        for (int i = 0; i < m_; ++i) {
            worst = std::max({worst, lp_->row_lo[static_cast<std::size_t>(i)] - act(i),
                              act(i) - lp_->row_hi[static_cast<std::size_t>(i)]});
        }
        if (worst <= 10.0 * kFeasTol) return SimplexStatus::optimal;
    }
    return SimplexStatus::iteration_limit;
}

std::vector<double> Simplex::primal() const { return {val_.begin(), val_.begin() + n_}; }

double Simplex::objective() const {
    double z = lp_->offset;
    for (int j = 0; j < n_; ++j) z += lp_->cost[static_cast<std::size_t>(j)] * val_[static_cast<std::size_t>(j)];
    return z;
}

}  // namespace apsems::detail

namespace apsems {

LpSolution solve_lp(const MilpModel& model) {
    model.validate();
    const auto lp = detail::LpProblem::from_model(model);
    detail::Simplex s(lp);
    const auto st = s.solve();
    LpSolution sol;
    sol.iterations = s.iterations();
    switch (st) {
        case detail::SimplexStatus::optimal:
            sol.status = LpStatus::optimal;
            sol.x = s.primal();
            sol.objective = model.objective_value(sol.x);
            sol.basis = s.basis();
            break;
        case detail::SimplexStatus::infeasible: sol.status = LpStatus::infeasible; break;
        case detail::SimplexStatus::unbounded: sol.status = LpStatus::unbounded; break;
        case detail::SimplexStatus::iteration_limit:
            throw SolverError("simplex failed to converge on model '" + model.name + "'");
    }
    return sol;
}

}  // namespace apsems
