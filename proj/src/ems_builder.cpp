#include "apsems/ems_builder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "apsems/errors.hpp"

namespace apsems {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::I: return "I";
        case Variant::II: return "II";
        case Variant::III: return "III";
    }
    return "?";
}

Variant parse_variant(const std::string& text) {
    if (text == "I" || text == "1") return Variant::I;
    if (text == "II" || text == "2") return Variant::II;
    if (text == "III" || text == "3") return Variant::III;
    throw ConfigError("variant: expected I, II or III, got '" + text + "'");
}

ModelCounts model_counts(int n_g, int k_steps, int n_scen, Variant variant) {
    const int j = 1 << n_g;
    ModelCounts c;
    c.variables = k_steps * (7 * n_g + 6 + 2 * j);
    c.binaries = k_steps * (3 * n_g + 1 + j);
    int rows = 8 * n_g + 7 + j + 3 * n_g * j;
    if (variant != Variant::I) rows += n_scen * (j + 1) + 2;
    if (variant == Variant::III) rows += 3;
    c.rows = k_steps * rows;
    c.sos_sets = k_steps;
    return c;
}

std::vector<std::string> row_group_names() {
    return {"dyn_gt",    "dyn_ulock", "dyn_soc",      "bal",       "gate_lo",   "gate_hi",   "dev",
            "link_on",   "link_off",  "link_sum",     "sosrow",    "dlin",      "freq_damp", "freq_inertia",
            "freq_agg",  "gthead_up", "gthead_lo",    "gtoff_up",  "gtoff_lo",  "gthead_x",  "ess_dis_s",
            "ess_dis_res", "ess_ch_s", "ess_ch_res",  "ebound_up", "ebound_lo", "ebound_lambda"};
}

double big_m_value(double max_perturbation, const GridSpec& grid) {
    return 2.0 * max_perturbation / (grid.r_ss * (1.0 - grid.r_tr)) + 1.0;
}

double big_m_value(const ScenarioSet& scen, const GridSpec& grid) {
    return big_m_value(scen.count() > 0 ? worst_case_perturbation(scen) : 0.0, grid);
}

double effective_big_m(double max_perturbation, const System& sys) {
    double m = big_m_value(max_perturbation, sys.grid());
    for (const auto& g : sys.generators()) m = std::max({m, g.p_max, g.p_min + g.droop_max * sys.grid().r_tr});
    return m;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_inputs(const System& sys, const ModelInputs& in) {
    std::vector<std::string> issues;
    const int k_steps = sys.horizon().k_steps;
    const auto& ess = sys.ess();
    const auto& grid = sys.grid();
    if (static_cast<int>(in.xi.size()) < k_steps) issues.push_back(fmt::format("xi: {} values for horizon {}", in.xi.size(), k_steps));
    for (double v : in.xi) {
        if (!std::isfinite(v)) issues.emplace_back("xi: non-finite value");
    }
    if (in.variant != Variant::I && in.perturbations.empty()) issues.emplace_back("perturbations: at least one scenario required");
    for (std::size_t i = 0; i < in.perturbations.size(); ++i) {
        const auto& row = in.perturbations[i];
        if (static_cast<int>(row.size()) < k_steps) issues.push_back(fmt::format("perturbations[{}]: shorter than horizon", i));
        for (double v : row) {
            if (!(v >= 0.0) || !std::isfinite(v)) issues.push_back(fmt::format("perturbations[{}]: values must be finite and >= 0", i));
        }
    }
    if (!(in.soc0 >= ess.soc_min - 1e-9 && in.soc0 <= ess.soc_max + 1e-9)) {
        issues.push_back(fmt::format("soc0: {} outside [{}, {}]", in.soc0, ess.soc_min, ess.soc_max));
    }
    if (static_cast<int>(in.prev_states.size()) != sys.n_g()) {
        issues.push_back(fmt::format("prev_states: {} entries for {} generators", in.prev_states.size(), sys.n_g()));
    }
    for (int s : in.prev_states) {
        if (s != 0 && s != 1) issues.emplace_back("prev_states: entries must be 0 or 1");
    }
    for (const auto& g : sys.generators()) {
        const double d = in.variant == Variant::I ? g.default_droop : g.droop_min;
        if (g.p_min + d * grid.r_tr > g.p_max - d * grid.r_tr + 1e-12) {
            issues.push_back(fmt::format("generator {}: droop headroom {} leaves no feasible power band", g.name, d * grid.r_tr));
        }
    }
    const auto& w = in.weights;
    if (w.deviation < 0 || w.droop_gt < 0 || w.droop_ess < 0 || w.vinertia_ess < 0) {
        issues.emplace_back("weights: must be >= 0");
    }
    if (!issues.empty()) {
        std::string msg = "cannot build model:";
        for (const auto& s : issues) msg += "\n  " + s;
        throw BuildError(msg);
    }
}

}  // namespace

MilpModel build_model(const System& sys, const ModelInputs& in) {
    check_inputs(sys, in);
    const int ng = sys.n_g();
    const int kk = sys.horizon().k_steps;
    const auto& cfg = sys.configs();
    const int nj = static_cast<int>(cfg.rows());
    const auto& grid = sys.grid();
    const auto& ess = sys.ess();
    const double t_step = sys.horizon().step_seconds;
    const bool freq = in.variant != Variant::I;
    const bool ebound = in.variant == Variant::III;

    double max_pert = 0.0;
    for (const auto& row : in.perturbations) {
        for (int p = 0; p < kk; ++p) max_pert = std::max(max_pert, row[static_cast<std::size_t>(p)]);
    }
    const double big_m = effective_big_m(max_pert, sys);
    const double c_damp = grid.r_ss * (1.0 - grid.r_tr);
    const double soc_gain = sys.soc_per_pu_step();
    const double nu = grid.r_ss * grid.s_base / (3600.0 * ess.e_max);
    double soc_value = 0.0;
    if (in.weights.soc_terminal) {
        soc_value = *in.weights.soc_terminal;
    } else {
        double dearest = 0.0;
        for (const auto& g : sys.generators()) dearest = std::max(dearest, g.fuel_b);
        soc_value = dearest * ess.e_max / (grid.s_base * ess.eta_ch);
    }

    MilpModel m;
    m.name = fmt::format("ems_{}", to_string(in.variant));
    auto group = [&](const std::string& name, int idx) { m.var_groups[name].push_back(idx); };

    // variables
    ModelLayout lay;
    lay.periods.resize(static_cast<std::size_t>(kk));
    for (int p = 0; p < kk; ++p) {
        auto& pr = lay.periods[static_cast<std::size_t>(p)];
        for (int g = 0; g < ng; ++g) {
            const auto& gen = sys.generator(g);
            auto name = [&](const char* base) { return fmt::format("{}_g{}_k{}", base, g, p); };
            pr.x.push_back(m.add_binary(name("x_gt")));
            pr.u_on.push_back(m.add_binary(name("u_on")));
            pr.u_off.push_back(m.add_binary(name("u_off")));
            pr.p.push_back(m.add_variable(name("P_gt"), 0.0, gen.p_max));
            pr.z_plus.push_back(m.add_variable(name("z_plus"), 0.0, kInf));
            pr.z_minus.push_back(m.add_variable(name("z_minus"), 0.0, kInf));
            if (freq) {
                pr.droop.push_back(m.add_variable(name("D_g"), gen.droop_min, gen.droop_max));
            } else {
                pr.droop.push_back(m.add_variable(name("D_g"), gen.default_droop, gen.default_droop));
            }
        }
        pr.p_ch = m.add_variable(fmt::format("P_ch_k{}", p), 0.0, ess.p_max);
        pr.p_dis = m.add_variable(fmt::format("P_dis_k{}", p), 0.0, ess.p_max);
        pr.s_dis = m.add_binary(fmt::format("s_dis_k{}", p));
        pr.soc = m.add_variable(fmt::format("soc_k{}", p), ess.soc_min, ess.soc_max);
        pr.d_b = m.add_variable(fmt::format("D_b_k{}", p), 0.0, freq ? ess.vdroop_max : 0.0);
        pr.m_b = m.add_variable(fmt::format("M_b_k{}", p), 0.0, freq ? ess.vinertia_max : 0.0);
        for (int j = 0; j < nj; ++j) pr.b.push_back(m.add_binary(fmt::format("b_j{}_k{}", j, p)));
        for (int j = 0; j < nj; ++j) pr.d_cfg.push_back(m.add_variable(fmt::format("Dcfg_j{}_k{}", j, p), 0.0, kInf));

        for (int g = 0; g < ng; ++g) {
            group("x_gt", pr.x[static_cast<std::size_t>(g)]);
            group("u_on", pr.u_on[static_cast<std::size_t>(g)]);
            group("u_off", pr.u_off[static_cast<std::size_t>(g)]);
            group("P_gt", pr.p[static_cast<std::size_t>(g)]);
            group("z_plus", pr.z_plus[static_cast<std::size_t>(g)]);
            group("z_minus", pr.z_minus[static_cast<std::size_t>(g)]);
            group("D_g", pr.droop[static_cast<std::size_t>(g)]);
        }
        group("P_ch", pr.p_ch);
        group("P_dis", pr.p_dis);
        group("s_dis", pr.s_dis);
        group("soc", pr.soc);
        group("D_b", pr.d_b);
        group("M_b", pr.m_b);
        for (int j = 0; j < nj; ++j) {
            group("b", pr.b[static_cast<std::size_t>(j)]);
            group("Dcfg", pr.d_cfg[static_cast<std::size_t>(j)]);
        }
    }
    m.var_groups["dims"] = {ng, kk, nj};

    // rows
    auto row = [&](const std::string& grp, std::string name, std::vector<Term> terms, Sense s, double rhs) {
        const int r = m.add_constraint(std::move(name), std::move(terms), s, rhs);
        m.row_groups[grp].push_back(r);
    };
    for (const auto& g : row_group_names()) m.row_groups[g];

    for (int p = 0; p < kk; ++p) {
        const auto& pr = lay.periods[static_cast<std::size_t>(p)];
        const auto* prev = p > 0 ? &lay.periods[static_cast<std::size_t>(p - 1)] : nullptr;
        const double xi = in.xi[static_cast<std::size_t>(p)];

        // (a) state dynamics
        for (int g = 0; g < ng; ++g) {
            const auto gi = static_cast<std::size_t>(g);
            std::vector<Term> t{{pr.x[gi], 1.0}, {pr.u_on[gi], -1.0}, {pr.u_off[gi], 1.0}};
            double rhs = 0.0;
            if (prev) {
                t.push_back({prev->x[gi], -1.0});
            } else {
                rhs = in.prev_states[gi];
            }
            row("dyn_gt", fmt::format("dyn_gt_g{}_k{}", g, p), std::move(t), Sense::eq, rhs);
        }
        for (int g = 0; g < ng; ++g) {
            const auto gi = static_cast<std::size_t>(g);
            row("dyn_ulock", fmt::format("dyn_ulock_g{}_k{}", g, p), {{pr.u_on[gi], 1.0}, {pr.u_off[gi], 1.0}}, Sense::le, 1.0);
        }
        {
            std::vector<Term> t{{pr.soc, 1.0}, {pr.p_ch, -soc_gain * ess.eta_ch}, {pr.p_dis, soc_gain / ess.eta_dis}};
            double rhs = 0.0;
            if (prev) {
                t.push_back({prev->soc, -1.0});
            } else {
                rhs = in.soc0;
            }
            row("dyn_soc", fmt::format("dyn_soc_k{}", p), std::move(t), Sense::eq, rhs);
        }

        // (b) operation
        {
            std::vector<Term> t;
            for (int g = 0; g < ng; ++g) t.push_back({pr.p[static_cast<std::size_t>(g)], 1.0});
            t.push_back({pr.p_dis, 1.0});
            t.push_back({pr.p_ch, -1.0});
            row("bal", fmt::format("bal_k{}", p), std::move(t), Sense::eq, xi);
        }
        for (int g = 0; g < ng; ++g) {
            const auto gi = static_cast<std::size_t>(g);
            const auto& gen = sys.generator(g);
            row("gate_lo", fmt::format("gate_lo_g{}_k{}", g, p), {{pr.p[gi], 1.0}, {pr.x[gi], -gen.p_min}}, Sense::ge, 0.0);
            row("gate_hi", fmt::format("gate_hi_g{}_k{}", g, p), {{pr.p[gi], 1.0}, {pr.x[gi], -gen.p_max}}, Sense::le, 0.0);
        }
        for (int g = 0; g < ng; ++g) {
            const auto gi = static_cast<std::size_t>(g);
            row("dev", fmt::format("dev_g{}_k{}", g, p),
                {{pr.z_plus[gi], 1.0}, {pr.z_minus[gi], -1.0}, {pr.p[gi], -1.0}, {pr.x[gi], sys.generator(g).p_opt}}, Sense::eq,
                0.0);
        }

        // (c) configuration linking
        for (int j = 0; j < nj; ++j) {
            const auto ji = static_cast<std::size_t>(j);
            for (int g = 0; g < ng; ++g) {
                const auto gi = static_cast<std::size_t>(g);
                if (cfg.on(ji, g)) {
                    row("link_on", fmt::format("link_on_j{}_g{}_k{}", j, g, p), {{pr.x[gi], 1.0}, {pr.b[ji], -1.0}}, Sense::ge, 0.0);
                } else {
                    row("link_off", fmt::format("link_off_j{}_g{}_k{}", j, g, p), {{pr.x[gi], 1.0}, {pr.b[ji], 1.0}}, Sense::le, 1.0);
                }
            }
        }
        // the selected row of A_cf equals the commitment vector
        for (int g = 0; g < ng; ++g) {
            std::vector<Term> t{{pr.x[static_cast<std::size_t>(g)], 1.0}};
            for (int j = 0; j < nj; ++j) {
                if (cfg.on(static_cast<std::size_t>(j), g)) t.push_back({pr.b[static_cast<std::size_t>(j)], -1.0});
            }
            row("link_sum", fmt::format("link_sum_g{}_k{}", g, p), std::move(t), Sense::eq, 0.0);
        }
        {
            std::vector<Term> t;
            for (int j = 0; j < nj; ++j) t.push_back({pr.b[static_cast<std::size_t>(j)], 1.0});
            row("sosrow", fmt::format("sosrow_k{}", p), std::move(t), Sense::eq, 1.0);
            m.add_sos1(fmt::format("sos_b_k{}", p), pr.b);
        }

        // (d) damping per configuration
        for (int j = 0; j < nj; ++j) {
            const auto ji = static_cast<std::size_t>(j);
            std::vector<Term> t{{pr.d_cfg[ji], 1.0}, {pr.d_b, -1.0}};
            for (int g = 0; g < ng; ++g) {
                if (cfg.on(ji, g)) t.push_back({pr.droop[static_cast<std::size_t>(g)], -1.0});
            }
            row("dlin", fmt::format("dlin_j{}_k{}", j, p), std::move(t), Sense::eq, 0.0);
        }

        // (e) robust frequency rows
        if (freq) {
            for (std::size_t i = 0; i < in.perturbations.size(); ++i) {
                const double pnl = in.perturbations[i][static_cast<std::size_t>(p)];
                for (int j = 0; j < nj; ++j) {
                    const auto ji = static_cast<std::size_t>(j);
                    row("freq_damp", fmt::format("freq_damp_j{}_k{}_i{}", j, p, i), {{pr.b[ji], big_m}, {pr.d_cfg[ji], -c_damp}},
                        Sense::le, big_m - pnl);
                }
                std::vector<Term> t{{pr.m_b, 1.0}};
                for (int g = 0; g < ng; ++g) t.push_back({pr.x[static_cast<std::size_t>(g)], sys.generator(g).inertia_m});
                row("freq_inertia", fmt::format("freq_inertia_k{}_i{}", p, i), std::move(t), Sense::ge, pnl / grid.rocof_max);
            }
            // Aggregates implied by the rows above plus GT headroom. They cut
            // off fractional configuration mixes but no integer point.
            double pnl_max = 0.0;
            for (const auto& pert : in.perturbations) pnl_max = std::max(pnl_max, pert[static_cast<std::size_t>(p)]);
            std::vector<Term> head{{pr.d_b, 1.0}};
            std::vector<Term> cap{{pr.d_b, 1.0}};
            for (int g = 0; g < ng; ++g) {
                const auto gi = static_cast<std::size_t>(g);
                head.push_back({pr.x[gi], sys.generator(g).p_max / grid.r_tr});
                head.push_back({pr.p[gi], -1.0 / grid.r_tr});
                cap.push_back({pr.x[gi], sys.generator(g).droop_max});
            }
            row("freq_agg", fmt::format("freq_agg_head_k{}", p), std::move(head), Sense::ge, pnl_max / c_damp);
            row("freq_agg", fmt::format("freq_agg_cap_k{}", p), std::move(cap), Sense::ge, pnl_max / c_damp);
        }

        // (f) GT headroom under the selected configuration
        for (int j = 0; j < nj; ++j) {
            const auto ji = static_cast<std::size_t>(j);
            for (int g = 0; g < ng; ++g) {
                const auto gi = static_cast<std::size_t>(g);
                const auto& gen = sys.generator(g);
                if (cfg.on(ji, g)) {
                    row("gthead_up", fmt::format("gthead_up_j{}_g{}_k{}", j, g, p),
                        {{pr.p[gi], 1.0}, {pr.b[ji], big_m}, {pr.droop[gi], grid.r_tr}}, Sense::le, gen.p_max + big_m);
                    row("gthead_lo", fmt::format("gthead_lo_j{}_g{}_k{}", j, g, p),
                        {{pr.p[gi], 1.0}, {pr.b[ji], -big_m}, {pr.droop[gi], -grid.r_tr}}, Sense::ge, gen.p_min - big_m);
                } else {
                    row("gtoff_up", fmt::format("gtoff_up_j{}_g{}_k{}", j, g, p), {{pr.p[gi], 1.0}, {pr.b[ji], big_m}}, Sense::le,
                        big_m);
                    row("gtoff_lo", fmt::format("gtoff_lo_j{}_g{}_k{}", j, g, p), {{pr.p[gi], 1.0}, {pr.b[ji], -big_m}}, Sense::ge,
                        -big_m);
                }
            }
        }

        // per-unit headroom gated by commitment; reduces to the rows above at x in {0, 1}
        for (int g = 0; g < ng; ++g) {
            const auto gi = static_cast<std::size_t>(g);
            const auto& gen = sys.generator(g);
            const double w = grid.r_tr * gen.droop_max;
            row("gthead_x", fmt::format("gthead_x_up_g{}_k{}", g, p),
                {{pr.p[gi], 1.0}, {pr.droop[gi], grid.r_tr}, {pr.x[gi], -(gen.p_max - w)}}, Sense::le, w);
            row("gthead_x", fmt::format("gthead_x_lo_g{}_k{}", g, p),
                {{pr.p[gi], 1.0}, {pr.droop[gi], -grid.r_tr}, {pr.x[gi], -(gen.p_min + w)}}, Sense::ge, -w);
        }

        // (g) ESS reserve headroom
        const double gamma = grid.rocof_max;
        row("ess_dis_s", fmt::format("ess_dis_s_k{}", p), {{pr.p_dis, 1.0}, {pr.s_dis, -ess.p_max}}, Sense::le, 0.0);
        row("ess_dis_res", fmt::format("ess_dis_res_k{}", p), {{pr.p_dis, 1.0}, {pr.d_b, grid.r_tr}, {pr.m_b, gamma}}, Sense::le,
            ess.p_max);
        row("ess_ch_s", fmt::format("ess_ch_s_k{}", p), {{pr.p_ch, 1.0}, {pr.s_dis, ess.p_max}}, Sense::le, ess.p_max);
        row("ess_ch_res", fmt::format("ess_ch_res_k{}", p), {{pr.p_ch, 1.0}, {pr.d_b, grid.r_tr}, {pr.m_b, gamma}}, Sense::le,
            ess.p_max);

        // (h) energy bound
        if (ebound) {
            const std::vector<Term> use{{pr.m_b, nu}, {pr.d_b, nu * t_step}};
            auto with = [&](std::vector<Term> extra) {
                std::vector<Term> t = use;
                t.insert(t.end(), extra.begin(), extra.end());
                return t;
            };
            if (prev) {
                row("ebound_up", fmt::format("ebound_up_k{}", p), with({{prev->soc, 1.0}}), Sense::le, ess.soc_max);
                row("ebound_lo", fmt::format("ebound_lo_k{}", p), with({{prev->soc, -1.0}}), Sense::le, -ess.soc_min);
            } else {
                row("ebound_up", fmt::format("ebound_up_k{}", p), use, Sense::le, ess.soc_max - in.soc0);
                row("ebound_lo", fmt::format("ebound_lo_k{}", p), use, Sense::le, in.soc0 - ess.soc_min);
            }
            row("ebound_lambda", fmt::format("ebound_lambda_k{}", p), with({{pr.soc, -ess.lambda}}), Sense::le, 0.0);
        }
    }

    // (i) objective
    std::vector<Term> obj;
    const double hours = t_step / 3600.0;
    for (int p = 0; p < kk; ++p) {
        const auto& pr = lay.periods[static_cast<std::size_t>(p)];
        for (int g = 0; g < ng; ++g) {
            const auto gi = static_cast<std::size_t>(g);
            const auto& gen = sys.generator(g);
            obj.push_back({pr.x[gi], gen.fuel_a * hours});
            obj.push_back({pr.p[gi], gen.fuel_b * hours});
            obj.push_back({pr.u_on[gi], gen.startup_cost});
            obj.push_back({pr.z_plus[gi], in.weights.deviation});
            obj.push_back({pr.z_minus[gi], in.weights.deviation});
            obj.push_back({pr.droop[gi], in.weights.droop_gt});
        }
        obj.push_back({pr.d_b, in.weights.droop_ess});
        obj.push_back({pr.m_b, in.weights.vinertia_ess});
    }
    obj.push_back({lay.periods.back().soc, -soc_value});
    m.set_objective(std::move(obj));
    m.validate();
    return m;
}

MilpModel build_model(const System& sys, const NetLoadForecast& fc, const ScenarioSet& scen, double soc0,
                      std::span<const int> prev_states, Variant variant, const Weights& weights) {
    ModelInputs in;
    in.xi = fc.xi;
    in.perturbations = scen.perturbations;
    in.soc0 = soc0;
    in.prev_states.assign(prev_states.begin(), prev_states.end());
    in.variant = variant;
    in.weights = weights;
    return build_model(sys, in);
}

ModelLayout layout_of(const MilpModel& model) {
    const auto dims = model.var_groups.find("dims");
    if (dims == model.var_groups.end() || dims->second.size() != 3) throw DomainError("model carries no EMS layout");
    ModelLayout lay;
    lay.n_g = dims->second[0];
    lay.k_steps = dims->second[1];
    lay.n_cfg = dims->second[2];
    const auto ng = static_cast<std::size_t>(lay.n_g);
    const auto nj = static_cast<std::size_t>(lay.n_cfg);
    auto grp = [&](const char* name) -> const std::vector<int>& { return model.var_groups.at(name); };
    lay.periods.resize(static_cast<std::size_t>(lay.k_steps));
    for (std::size_t p = 0; p < lay.periods.size(); ++p) {
        auto& pr = lay.periods[p];
        auto slice = [&](const char* name, std::size_t width) {
            const auto& v = grp(name);
            return std::vector<int>(v.begin() + static_cast<std::ptrdiff_t>(p * width),
                                    v.begin() + static_cast<std::ptrdiff_t>((p + 1) * width));
        };
        pr.x = slice("x_gt", ng);
        pr.u_on = slice("u_on", ng);
        pr.u_off = slice("u_off", ng);
        pr.p = slice("P_gt", ng);
        pr.z_plus = slice("z_plus", ng);
        pr.z_minus = slice("z_minus", ng);
        pr.droop = slice("D_g", ng);
        pr.p_ch = grp("P_ch")[p];
        pr.p_dis = grp("P_dis")[p];
        pr.s_dis = grp("s_dis")[p];
        pr.soc = grp("soc")[p];
        pr.d_b = grp("D_b")[p];
        pr.m_b = grp("M_b")[p];
        pr.b = slice("b", nj);
        pr.d_cfg = slice("Dcfg", nj);
    }
    return lay;
}

CostBreakdown cost_breakdown(const MilpModel& model, const std::vector<double>& x) {
    const auto lay = layout_of(model);
    std::vector<double> c(static_cast<std::size_t>(model.num_vars()), 0.0);
    for (const auto& t : model.objective) c[static_cast<std::size_t>(t.var)] = t.coef;
    auto term = [&](int v) { return c[static_cast<std::size_t>(v)] * x[static_cast<std::size_t>(v)]; };
    CostBreakdown cb;
    for (const auto& pr : lay.periods) {
        for (std::size_t g = 0; g < pr.x.size(); ++g) {
            cb.fuel += term(pr.x[g]) + term(pr.p[g]);
            cb.startup += term(pr.u_on[g]);
            cb.deviation += term(pr.z_plus[g]) + term(pr.z_minus[g]);
            cb.reserves += term(pr.droop[g]);
        }
        cb.reserves += term(pr.d_b) + term(pr.m_b);
    }
    cb.soc_value = -term(lay.periods.back().soc);
    return cb;
}

EmsDecision extract_decision(const MilpModel& model, const std::vector<double>& x) {
    constexpr double tol = 1e-6;
    if (x.size() != static_cast<std::size_t>(model.num_vars())) {
        throw ExtractionError(fmt::format("solution has {} entries, model has {} variables", x.size(), model.num_vars()), {});
    }
    std::vector<std::string> bad;
    for (int i = 0; i < model.num_rows(); ++i) {
        if (model.row_violation(i, x) > tol) bad.push_back(model.constraints[static_cast<std::size_t>(i)].name);
    }
    for (int j = 0; j < model.num_vars(); ++j) {
        const auto& v = model.variables[static_cast<std::size_t>(j)];
        const double xj = x[static_cast<std::size_t>(j)];
        if (xj < v.lower - tol || xj > v.upper + tol) bad.push_back("bound:" + v.name);
        if (v.type == VarType::binary && std::min(std::abs(xj), std::abs(xj - 1.0)) > tol) bad.push_back("integrality:" + v.name);
    }
    if (!bad.empty()) throw ExtractionError(fmt::format("{} rows or bounds violated by more than 1e-6", bad.size()), bad);

    const auto lay = layout_of(model);
    const ConfigTable cfg(lay.n_g);
    auto bin = [&](int v) { return static_cast<int>(std::lround(x[static_cast<std::size_t>(v)])); };
    auto val = [&](int v) { return x[static_cast<std::size_t>(v)]; };

    EmsDecision d;
    for (int p = 0; p < lay.k_steps; ++p) {
        const auto& pr = lay.periods[static_cast<std::size_t>(p)];
        StepDecision s;
        for (std::size_t g = 0; g < pr.x.size(); ++g) {
            s.gt_states.push_back(bin(pr.x[g]));
            s.startups.push_back(bin(pr.u_on[g]));
            s.shutdowns.push_back(bin(pr.u_off[g]));
            s.gt_powers.push_back(val(pr.p[g]));
            s.droops.push_back(val(pr.droop[g]));
            s.dev_plus.push_back(val(pr.z_plus[g]));
            s.dev_minus.push_back(val(pr.z_minus[g]));
        }
        s.ess_charge = val(pr.p_ch);
        s.ess_discharge = val(pr.p_dis);
        s.discharging = bin(pr.s_dis);
        s.soc = val(pr.soc);
        s.ess_droop = val(pr.d_b);
        s.ess_vinertia = val(pr.m_b);
        int selected = 0;
        for (std::size_t j = 0; j < pr.b.size(); ++j) {
            s.config_indicators.push_back(bin(pr.b[j]));
            s.config_damping.push_back(val(pr.d_cfg[j]));
            if (s.config_indicators.back() == 1) {
                ++selected;
                s.config = static_cast<int>(j);
            }
        }
        if (selected != 1) {
            throw ExtractionError(fmt::format("step {}: {} configuration indicators set, expected exactly one", p, selected),
                                  {fmt::format("sosrow_k{}", p)});
        }
        if (cfg.index_of(s.gt_states) != static_cast<std::size_t>(s.config)) {
            throw ExtractionError(fmt::format("step {}: selected configuration {} does not match unit states", p, s.config),
                                  {fmt::format("link_k{}", p)});
        }
        if ((s.discharging == 0 && s.ess_discharge > tol) || (s.discharging == 1 && s.ess_charge > tol)) {
            throw ExtractionError(fmt::format("step {}: charge/discharge exclusivity violated", p), {fmt::format("ess_k{}", p)});
        }
        d.steps.push_back(std::move(s));
    }
    d.objective = model.objective_value(x);
    d.costs = cost_breakdown(model, x);
    return d;
}

std::vector<double> decision_vector(const MilpModel& model, const EmsDecision& d) {
    const auto lay = layout_of(model);
    if (d.steps.size() != lay.periods.size()) throw DomainError("decision horizon does not match model");
    std::vector<double> x(static_cast<std::size_t>(model.num_vars()), 0.0);
    auto set = [&](int v, double value) { x[static_cast<std::size_t>(v)] = value; };
    for (std::size_t p = 0; p < lay.periods.size(); ++p) {
        const auto& pr = lay.periods[p];
        const auto& s = d.steps[p];
        for (std::size_t g = 0; g < pr.x.size(); ++g) {
            set(pr.x[g], s.gt_states[g]);
            set(pr.u_on[g], s.startups[g]);
            set(pr.u_off[g], s.shutdowns[g]);
            set(pr.p[g], s.gt_powers[g]);
            set(pr.droop[g], s.droops[g]);
            set(pr.z_plus[g], s.dev_plus[g]);
            set(pr.z_minus[g], s.dev_minus[g]);
        }
        set(pr.p_ch, s.ess_charge);
        set(pr.p_dis, s.ess_discharge);
        set(pr.s_dis, s.discharging);
        set(pr.soc, s.soc);
        set(pr.d_b, s.ess_droop);
        set(pr.m_b, s.ess_vinertia);
        for (std::size_t j = 0; j < pr.b.size(); ++j) {
            set(pr.b[j], s.config_indicators[j]);
            set(pr.d_cfg[j], s.config_damping[j]);
        }
    }
    return x;
}

}  // namespace apsems
