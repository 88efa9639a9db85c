#include "apsems/ems.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "apsems/errors.hpp"

namespace apsems {

std::string to_string(RunStatus s) {
    switch (s) {
        case RunStatus::completed: return "completed";
        case RunStatus::infeasible: return "infeasible";
        case RunStatus::limit: return "limit";
    }
    return "?";
}

std::string to_string(StepStatus s) {
    switch (s) {
        case StepStatus::ok: return "ok";
        case StepStatus::limit: return "limit";
        case StepStatus::infeasible: return "infeasible";
    }
    return "?";
}

double EmsRun::total_objective() const {
    double z = 0.0;
    for (const auto& s : steps) {
        if (s.status != StepStatus::infeasible) z += s.decision.objective;
    }
    return z;
}

namespace {

/// Per-step scenario seed; disjoint from the per-scenario stream indices.
std::uint64_t step_seed(std::uint64_t run_seed, int step) {
    return scenario_seed(run_seed, (std::uint64_t{1} << 40) + static_cast<std::uint64_t>(step));
}

TimeSeries concat(const TimeSeries& a, const TimeSeries& b) {
    if (a.step_seconds != b.step_seconds) throw ConfigError("history and realized series use different steps");
    TimeSeries out = a;
    out.values.insert(out.values.end(), b.values.begin(), b.values.end());
    return out;
}

ReserveAllocation allocation_of(const AppliedAction& a) {
    ReserveAllocation r;
    r.gt_droops = a.droops;
    r.ess_droop = a.d_b;
    r.ess_vinertia = a.m_b;
    r.gt_states = a.gt_states;
    return r;
}

void validate_step(const System& sys, const RunSettings& settings, StepRecord& rec) {
    const auto& a = rec.applied;
    ReserveSplit split;
    for (int g = 0; g < sys.n_g(); ++g) {
        if (!a.gt_states[static_cast<std::size_t>(g)]) continue;
        split.gt_droop_sum += a.droops[static_cast<std::size_t>(g)];
        split.gt_inertia_sum += sys.generator(g).inertia_m;
    }
    split.ess_droop = a.d_b;
    split.ess_vinertia = a.m_b;
    const auto& v = settings.validation;
    auto sc = SwingScenario::from_split(split, DisturbanceProfile::step(v.t_event, rec.max_perturbation.front()),
                                        v.duration, v.dt);
    sc.record_stride = v.record_stride;
    try {
        rec.trace = simulate(sc);
        rec.bounds = verify_bounds(rec.trace, sys.grid(), rec.energy);
        rec.validated = true;
    } catch (const Error& e) {
        rec.validation_error = e.what();
        rec.bounds = BoundsReport{false, false, false, false, 0.0, 0.0, 0.0, 0.0};
    }
}

}  // namespace

EmsRun run_rolling_horizon(const System& sys, const SeriesPair& history, const SeriesPair& realized,
                           const RunSettings& settings) {
    validate(settings.scenario);
    const int ng = sys.n_g();
    const int kk = sys.horizon().k_steps;
    if (realized.load.size() != realized.wind.size() || history.load.size() != history.wind.size()) {
        throw ConfigError("load and wind series differ in length");
    }
    if (!settings.initial_states.empty() && static_cast<int>(settings.initial_states.size()) != ng) {
        throw ConfigError(fmt::format("initial.gt_states: {} entries for {} generators", settings.initial_states.size(), ng));
    }

    const auto load_all = concat(history.load, realized.load);
    const auto wind_all = concat(history.wind, realized.wind);
    const auto hist_len = history.load.size();
    if (hist_len < static_cast<std::size_t>(settings.n_lags)) throw ConfigError("history shorter than the lag window");

    const auto load_est = fit_quantile_estimator(history.load, settings.n_lags, settings.tau,
                                                 {settings.neighbors, VariableKind::Load});
    const auto wind_est = fit_quantile_estimator(history.wind, settings.n_lags, settings.tau,
                                                 {settings.neighbors, VariableKind::Renewable});

    int steps = static_cast<int>(realized.load.size());
    if (settings.steps >= 0) {
        if (settings.steps > steps) {
            throw ConfigError(fmt::format("run.steps = {} but the realized series has {} points", settings.steps, steps));
        }
        steps = settings.steps;
    }
    const int n_scen = settings.scenario.n_override ? *settings.scenario.n_override : scenario_count(settings.scenario, kk);
    const int threads = settings.threads > 0 ? settings.threads : env_thread_cap();
    const double s_base = sys.grid().s_base;

    EmsRun run;
    run.variant = settings.variant;
    run.seed = settings.seed;
    std::vector<int> states = settings.initial_states.empty() ? std::vector<int>(static_cast<std::size_t>(ng), 1)
                                                              : settings.initial_states;
    double soc = settings.soc0;

    for (int s = 0; s < steps; ++s) {
        StepRecord rec;
        rec.step = s;
        const std::size_t now = hist_len + static_cast<std::size_t>(s);
        rec.time = load_all.time_at(now);
        rec.xi0 = (load_all.values[now] - wind_all.values[now]) / s_base;
        const auto lq = load_est.predict(load_all.lags_ending_at(now, settings.n_lags), kk, rec.time);
        const auto wq = wind_est.predict(wind_all.lags_ending_at(now, settings.n_lags), kk, rec.time);
        rec.forecast = net_load_forecast(lq, wq, rec.xi0, s_base);

        rec.scenario_seed = step_seed(settings.seed, s);
        const auto scen = draw_scenarios(rec.forecast, n_scen, rec.scenario_seed, threads);
        rec.n_scenarios = scen.count();
        for (int k = 0; k < kk; ++k) rec.max_perturbation.push_back(worst_case_perturbation(scen, k));

        rec.inputs.xi = rec.forecast.xi;
        rec.inputs.perturbations = scen.perturbations;
        rec.inputs.soc0 = soc;
        rec.inputs.prev_states = states;
        rec.inputs.variant = settings.variant;
        rec.inputs.weights = settings.weights;
        const auto model = build_model(sys, rec.inputs);
        if (settings.on_model) settings.on_model(s, model);

        rec.solve = solve_mip(model, settings.limits);
        rec.soc_before = soc;
        if (!rec.solve.has_incumbent()) {
            rec.status = StepStatus::infeasible;
            if (rec.solve.status == MipStatus::limit) {
                run.status = RunStatus::limit;
                run.diagnostics.push_back(fmt::format("step {}: solver limit reached without a feasible schedule", s));
            } else {
                run.status = RunStatus::infeasible;
                run.diagnostics.push_back(fmt::format("step {}: model infeasible", s));
                for (const auto& g : diagnose_infeasibility(model, settings.limits)) {
                    run.diagnostics.push_back(fmt::format("step {}: feasible once row group '{}' is dropped", s, g));
                }
            }
            run.steps.push_back(std::move(rec));
            break;
        }
        if (rec.solve.status == MipStatus::limit) {
            rec.status = StepStatus::limit;
            run.status = RunStatus::limit;
        }
        rec.decision = extract_decision(model, rec.solve.incumbent);
        rec.solve.incumbent.clear();

        const auto& first = rec.decision.steps.front();
        auto& a = rec.applied;
        a.gt_states = first.gt_states;
        a.startups = first.startups;
        // clip simplex roundoff below zero
        auto nonneg = [](double v) { return std::max(0.0, v); };
        a.gt_powers = first.gt_powers;
        a.droops = first.droops;
        for (auto& v : a.gt_powers) v = nonneg(v);
        a.p_ch = nonneg(first.ess_charge);
        a.p_dis = nonneg(first.ess_discharge);
        a.d_b = nonneg(first.ess_droop);
        a.m_b = nonneg(first.ess_vinertia);
        a.config = first.config;

        const auto alloc = allocation_of(a);
        rec.response = aggregate(alloc, sys.generators());
        rec.required_damping = min_damping(rec.max_perturbation.front(), sys.grid().r_ss, sys.grid().r_tr);
        rec.required_inertia = min_inertia(rec.max_perturbation.front(), sys.grid().rocof_max);
        rec.energy = energy_bound(alloc, sys.grid(), sys.horizon(), sys.ess(), soc);
        validate_step(sys, settings, rec);

        states = a.gt_states;
        soc = first.soc;
        rec.soc_after = soc;
        rec.energy_bound_exceeded = exceeds_energy_bound(sys, rec);
        run.steps.push_back(std::move(rec));
    }
    run.kpis = compute_kpis(sys, run);
    return run;
}

bool exceeds_energy_bound(const System& sys, const StepRecord& rec) {
    const auto& grid = sys.grid();
    const auto& ess = sys.ess();
    const double nu = grid.r_ss * grid.s_base / (3600.0 * ess.e_max);
    const double lhs = nu * (rec.applied.m_b + rec.applied.d_b * sys.horizon().step_seconds);
    return lhs > ess.lambda * rec.soc_after + 1e-9;
}

KpiReport compute_kpis(const System& sys, const EmsRun& run) {
    KpiReport k;
    const double hours = sys.horizon().step_seconds / 3600.0;
    const auto& ess = sys.ess();
    const double full_cycle = 2.0 * ess.e_max * 3600.0 / sys.grid().s_base;  // pu*s
    for (const auto& rec : run.steps) {
        if (rec.status == StepStatus::infeasible) continue;
        const auto& a = rec.applied;
        double startup = 0.0;
        for (int g = 0; g < sys.n_g(); ++g) {
            const auto gi = static_cast<std::size_t>(g);
            const auto& gen = sys.generator(g);
            if (a.gt_states[gi]) {
                k.fuel_consumption += (gen.fuel_a + gen.fuel_b * a.gt_powers[gi]) * hours;
                k.gt_hours += hours;
            }
            if (a.startups[gi]) {
                ++k.gt_startups;
                startup += gen.startup_cost;
            }
        }
        k.operating_cost += startup;
        k.ess_degradation += (a.p_ch + a.p_dis) * sys.horizon().step_seconds / full_cycle;
        if (rec.energy_bound_exceeded) ++k.bound_violations;
    }
    k.operating_cost += k.fuel_consumption;
    return k;
}

SecurityRecheck recheck_security(const System& sys, const EmsRun& run) {
    SecurityRecheck out;
    const auto& grid = sys.grid();
    for (const auto& rec : run.steps) {
        if (rec.status == StepStatus::infeasible) continue;
        const auto& per_k = rec.inputs.perturbations;
        for (std::size_t k = 0; k < rec.decision.steps.size(); ++k) {
            const auto& d = rec.decision.steps[k];
            ReserveAllocation alloc{d.droops, d.ess_droop, d.ess_vinertia, d.gt_states};
            const auto resp = aggregate(alloc, sys.generators());
            for (int g = 0; g < sys.n_g(); ++g) {
                const auto gi = static_cast<std::size_t>(g);
                if (d.gt_states[gi]) continue;
                out.max_offline_power = std::max(out.max_offline_power, std::abs(d.gt_powers[gi]));
                if (std::abs(d.gt_powers[gi]) > 1e-9) ++out.offline_power_violations;
            }
            if (run.variant == Variant::I) continue;
            for (const auto& row : per_k) {
                const double p = row[k];
                const double dmin = min_damping(p, grid.r_ss, grid.r_tr);
                const double mmin = min_inertia(p, grid.rocof_max);
                if (resp.damping < dmin - 1e-7 * std::max(1.0, dmin)) ++out.damping_violations;
                if (resp.inertia < mmin - 1e-7 * std::max(1.0, mmin)) ++out.inertia_violations;
            }
        }
    }
    return out;
}

std::vector<std::string> diagnose_infeasibility(const MilpModel& model, const MipLimits& limits) {
    MipLimits probe = limits;
    probe.max_nodes = std::min<long>(limits.max_nodes, 2000);
    probe.max_seconds = std::min(limits.max_seconds, 30.0);
    std::vector<std::string> culprits;
    for (const auto& [group, rows] : model.row_groups) {
        if (rows.empty()) continue;
        std::vector<bool> drop(model.constraints.size(), false);
        for (int r : rows) drop[static_cast<std::size_t>(r)] = true;
        MilpModel reduced = model;
        reduced.constraints.clear();
        reduced.row_groups.clear();
        for (std::size_t r = 0; r < model.constraints.size(); ++r) {
            if (!drop[r]) reduced.constraints.push_back(model.constraints[r]);
        }
        if (solve_lp(reduced).status != LpStatus::optimal) continue;
        if (solve_mip(reduced, probe).has_incumbent()) culprits.push_back(group);
    }
    return culprits;
}

VariantComparison compare_variants(const System& sys, const SeriesPair& history, const SeriesPair& realized,
                                   RunSettings settings) {
    VariantComparison cmp;
    const Variant all[3] = {Variant::I, Variant::II, Variant::III};
    for (int v = 0; v < 3; ++v) {
        settings.variant = all[v];
        cmp.runs[v] = run_rolling_horizon(sys, history, realized, settings);
    }
    for (const auto& rec : cmp.runs[2].steps) {
        if (rec.status == StepStatus::infeasible) break;
        std::array<double, 3> z{};
        for (int v = 0; v < 2; ++v) {
            auto in = rec.inputs;
            in.variant = all[v];
            const auto r = solve_mip(build_model(sys, in), settings.limits);
            z[static_cast<std::size_t>(v)] = r.has_incumbent() ? r.objective : std::numeric_limits<double>::quiet_NaN();
        }
        z[2] = rec.decision.objective;
        cmp.nested_objectives.push_back(z);
    }
    auto delta = [](const KpiReport& a, const KpiReport& b) {
        KpiReport d;
        d.fuel_consumption = a.fuel_consumption - b.fuel_consumption;
        d.operating_cost = a.operating_cost - b.operating_cost;
        d.gt_hours = a.gt_hours - b.gt_hours;
        d.gt_startups = a.gt_startups - b.gt_startups;
        d.ess_degradation = a.ess_degradation - b.ess_degradation;
        d.bound_violations = a.bound_violations - b.bound_violations;
        return d;
    };
    cmp.kpi_delta_ii = delta(cmp.runs[1].kpis, cmp.runs[0].kpis);
    cmp.kpi_delta_iii = delta(cmp.runs[2].kpis, cmp.runs[0].kpis);
    return cmp;
}

// ---------------------------------------------------------------- writers

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

std::string num(double v) { return fmt::format("{:.10g}", v); }

nlohmann::ordered_json kpi_to_json(const KpiReport& k) {
    nlohmann::ordered_json j;
    j["fuel_consumption"] = k.fuel_consumption;
    j["operating_cost"] = k.operating_cost;
    j["gt_hours"] = k.gt_hours;
    j["gt_startups"] = k.gt_startups;
    j["ess_degradation_efc"] = k.ess_degradation;
    j["bound_violations"] = k.bound_violations;
    return j;
}

}  // namespace

void write_schedule_csv(const std::filesystem::path& path, const System& sys, const EmsRun& run) {
    auto out = open_out(path);
    const int ng = sys.n_g();
    const auto& grid = sys.grid();
    const auto& ess = sys.ess();
    const double t_step = sys.horizon().step_seconds;
    const double nu = grid.r_ss * grid.s_base / (3600.0 * ess.e_max);

    out << "step,k,time,applied,status,xi_pu,max_perturbation_pu,config";
    for (int g = 0; g < ng; ++g) out << fmt::format(",x_g{0},p_g{0}_pu,d_g{0}", g);
    out << ",p_ch_pu,p_dis_pu,soc,d_b,m_b,m_total_s,d_total,d_required,m_required"
           ",ebound_lhs,ebound_rhs_upper,ebound_rhs_lower,ebound_rhs_lambda,objective\n";
    for (const auto& rec : run.steps) {
        if (rec.status == StepStatus::infeasible) continue;
        double soc_prev = rec.soc_before;
        for (std::size_t k = 0; k < rec.decision.steps.size(); ++k) {
            const auto& d = rec.decision.steps[k];
            ReserveAllocation alloc{d.droops, d.ess_droop, d.ess_vinertia, d.gt_states};
            const auto resp = aggregate(alloc, sys.generators());
            const double pmax = rec.max_perturbation[k];
            out << rec.step << ',' << k << ',' << format_iso8601(rec.time + std::chrono::seconds(static_cast<long>(k * t_step)))
                << ',' << (k == 0 ? 1 : 0) << ',' << to_string(rec.status) << ',' << num(rec.inputs.xi[k]) << ','
                << num(pmax) << ',' << d.config;
            for (int g = 0; g < ng; ++g) {
                const auto gi = static_cast<std::size_t>(g);
                out << ',' << d.gt_states[gi] << ',' << num(d.gt_powers[gi]) << ',' << num(d.droops[gi]);
            }
            out << ',' << num(d.ess_charge) << ',' << num(d.ess_discharge) << ',' << num(d.soc) << ',' << num(d.ess_droop)
                << ',' << num(d.ess_vinertia) << ',' << num(resp.inertia) << ',' << num(resp.damping) << ','
                << num(min_damping(pmax, grid.r_ss, grid.r_tr)) << ',' << num(min_inertia(pmax, grid.rocof_max)) << ','
                << num(nu * (d.ess_vinertia + d.ess_droop * t_step)) << ',' << num(ess.soc_max - soc_prev) << ','
                << num(soc_prev - ess.soc_min) << ',' << num(ess.lambda * d.soc) << ','
                << num(rec.decision.objective) << '\n';
            soc_prev = d.soc;
        }
    }
}

void write_kpi_json(const std::filesystem::path& path, const EmsRun& run) {
    nlohmann::ordered_json j;
    j["variant"] = to_string(run.variant);
    j["seed"] = run.seed;
    j["status"] = to_string(run.status);
    j["steps"] = run.steps.size();
    j["total_objective"] = run.total_objective();
    j["kpis"] = kpi_to_json(run.kpis);
    auto steps = nlohmann::ordered_json::array();
    for (const auto& rec : run.steps) {
        nlohmann::ordered_json s;
        s["step"] = rec.step;
        s["status"] = to_string(rec.status);
        s["objective"] = rec.decision.objective;
        s["gap"] = rec.solve.gap;
        s["nodes"] = rec.solve.nodes;
        s["scenarios"] = rec.n_scenarios;
        s["validated"] = rec.validated;
        s["bounds_ok"] = rec.bounds.all_ok();
        s["energy_bound_exceeded"] = rec.energy_bound_exceeded;
        steps.push_back(std::move(s));
    }
    j["per_step"] = std::move(steps);
    j["diagnostics"] = run.diagnostics;
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

void write_traces(const std::filesystem::path& dir, const EmsRun& run) {
    std::filesystem::create_directories(dir);
    for (const auto& rec : run.steps) {
        if (!rec.validated) continue;
        write_trace_csv(dir / fmt::format("step_{}.csv", rec.step), rec.trace);
    }
}

void write_variants_csv(const std::filesystem::path& path, const VariantComparison& cmp) {
    auto out = open_out(path);
    out << "record,variant,step,quantity,value\n";
    const char* names[3] = {"I", "II", "III"};
    for (int v = 0; v < 3; ++v) {
        for (const auto& rec : cmp.runs[v].steps) {
            if (rec.status == StepStatus::infeasible) continue;
            auto row = [&](const char* q, double val) {
                out << "trajectory," << names[v] << ',' << rec.step << ',' << q << ',' << num(val) << '\n';
            };
            row("m_total", rec.response.inertia);
            row("d_total", rec.response.damping);
            row("m_b", rec.applied.m_b);
            row("d_b", rec.applied.d_b);
            row("soc", rec.soc_after);
            row("objective", rec.decision.objective);
        }
    }
    for (std::size_t s = 0; s < cmp.nested_objectives.size(); ++s) {
        for (int v = 0; v < 3; ++v) {
            out << "nested_objective," << names[v] << ',' << s << ",objective," << num(cmp.nested_objectives[s][v]) << '\n';
        }
    }
    auto kpis = [&](const char* record, const char* variant, const KpiReport& k) {
        const auto j = kpi_to_json(k);
        for (const auto& [key, val] : j.items()) {
            out << record << ',' << variant << ",-1," << key << ',' << num(val.get<double>()) << '\n';
        }
    };
    for (int v = 0; v < 3; ++v) kpis("kpi", names[v], cmp.runs[v].kpis);
    kpis("kpi_delta", "II-I", cmp.kpi_delta_ii);
    kpis("kpi_delta", "III-I", cmp.kpi_delta_iii);
}

}  // namespace apsems
