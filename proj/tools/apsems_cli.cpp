// apsems: forecast / schedule / simulate / compare on a JSON run configuration.
//
// Exit codes: 0 success, 1 configuration or ingestion error, 2 bound or
// constraint violation detected, 3 solver limit reached.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "apsems/errors.hpp"
#include "apsems/run_config.hpp"

namespace fs = std::filesystem;
using namespace apsems;

namespace {

constexpr int kOk = 0;
constexpr int kConfig = 1;
constexpr int kViolation = 2;
constexpr int kLimit = 3;

struct Options {
    std::string config;
    std::string data;
    std::string variant;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    bool export_model = false;
    std::optional<int> n_override;
    std::optional<double> max_seconds;
    std::optional<int> steps;

    // simulate
    double m_total = 0.0;
    double d_total = 0.0;
    double m_b = 0.0;
    double d_b = 0.0;
    double step_pu = 0.4;
    double t_event = 2.0;
    double duration = 60.0;
    double dt = 1e-3;
    std::optional<double> soc;
};

RunConfig resolve(const Options& o) {
    if (o.config.empty()) throw ConfigError("--config: required");
    RunConfig cfg = load_run_config(o.config);
    if (!o.data.empty()) cfg.data_path = o.data;
    if (!o.variant.empty()) {
        try {
            cfg.settings.variant = parse_variant(o.variant);
        } catch (const std::exception&) {
            throw ConfigError("--variant: expected I, II or III");
        }
    }
    if (o.seed) cfg.settings.seed = *o.seed;
    if (o.n_override) {
        if (*o.n_override < 1) throw ConfigError("--n-override: must be >= 1");
        cfg.settings.scenario.n_override = *o.n_override;
    }
    if (o.max_seconds) {
        if (!(*o.max_seconds > 0.0)) throw ConfigError("--max-seconds: must be positive");
        cfg.settings.limits.max_seconds = *o.max_seconds;
    }
    if (o.steps) {
        if (*o.steps < 1) throw ConfigError("--steps: must be >= 1");
        cfg.settings.steps = *o.steps;
    }
    if (!fs::exists(cfg.system_path)) throw ConfigError(fmt::format("system: {} does not exist", cfg.system_path.string()));
    if (!fs::exists(cfg.data_path)) throw ConfigError(fmt::format("data: {} does not exist", cfg.data_path.string()));
    return cfg;
}

fs::path prepare_out(const std::string& out) {
    fs::path dir = out;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ConfigError(fmt::format("--out: cannot create {}", out));
    return dir;
}

/// Exit status of a finished run: limit first, then any detected violation.
int run_exit_code(const System& sys, const EmsRun& run) {
    if (run.status == RunStatus::limit) return kLimit;
    if (run.status == RunStatus::infeasible) return kViolation;
    if (run.variant == Variant::I) return kOk;
    if (!recheck_security(sys, run).ok()) return kViolation;
    for (const auto& rec : run.steps) {
        if (rec.energy_bound_exceeded || !rec.bounds.all_ok()) return kViolation;
    }
    return kOk;
}

void print_run(const EmsRun& run) {
    const auto& k = run.kpis;
    fmt::print("variant {}  seed {}  steps {}  status {}\n", to_string(run.variant), run.seed, run.steps.size(),
               to_string(run.status));
    fmt::print("objective {:.6f}\n", run.total_objective());
    fmt::print("fuel {:.4f}  operating cost {:.4f}  GT hours {:.2f}  start-ups {}  ESS cycles {:.5f}  bound violations {}\n",
               k.fuel_consumption, k.operating_cost, k.gt_hours, k.gt_startups, k.ess_degradation, k.bound_violations);
    for (const auto& d : run.diagnostics) fmt::print(stderr, "{}\n", d);
}

int cmd_forecast(const Options& o) {
    const RunConfig cfg = resolve(o);
    const RunData data = load_run_data(cfg);
    const auto& st = cfg.settings;
    const auto dir = prepare_out(o.out);

    const auto est = fit_quantile_estimator(data.history.load, st.n_lags, st.tau, {st.neighbors, VariableKind::Load});
    TimeSeries all = data.history.load;
    all.values.insert(all.values.end(), data.realized.load.values.begin(), data.realized.load.values.end());
    const std::size_t hist = data.history.load.size();
    int steps = static_cast<int>(data.realized.load.size());
    if (st.steps > 0) steps = std::min(steps, st.steps);

    for (int k = 0; k < steps; ++k) {
        const std::size_t now = hist + static_cast<std::size_t>(k);
        const auto qf = est.predict(all.lags_ending_at(now, st.n_lags), 1, all.time_at(now));
        write_forecast_csv(dir / fmt::format("forecast_k{}.csv", k), qf, 1);
    }
    fmt::print("wrote {} forecast files to {}\n", steps, dir.string());
    return kOk;
}

int cmd_schedule(const Options& o) {
    RunConfig cfg = resolve(o);
    const RunData data = load_run_data(cfg);
    const auto dir = prepare_out(o.out);
    if (o.export_model) {
        cfg.settings.on_model = [&dir](int step, const MilpModel& m) {
            if (step == 0) write_mps(m, dir / "model.mps");
        };
    }
    const EmsRun run = run_rolling_horizon(data.system, data.history, data.realized, cfg.settings);
    write_schedule_csv(dir / "schedule.csv", data.system, run);
    write_kpi_json(dir / "kpi.json", run);
    write_traces(dir / "traces", run);
    print_run(run);
    return run_exit_code(data.system, run);
}

int cmd_simulate(const Options& o) {
    const RunConfig cfg = resolve(o);
    const System sys = load_system(cfg.system_path);
    const auto dir = prepare_out(o.out);

    SwingScenario sc;
    sc.m_total = o.m_total;
    sc.d_total = o.d_total;
    sc.split.ess_droop = o.d_b;
    sc.split.ess_vinertia = o.m_b;
    sc.split.gt_droop_sum = o.d_total - o.d_b;
    sc.split.gt_inertia_sum = o.m_total - o.m_b;
    sc.disturbance = o.step_pu == 0.0 ? DisturbanceProfile::none() : DisturbanceProfile::step(o.t_event, o.step_pu);
    sc.duration = o.duration;
    sc.dt = o.dt;
    sc.record_stride = std::max(1, static_cast<int>(std::lround(0.01 / o.dt)));
    if (!(o.m_total > 0.0) || o.d_total < 0.0 || o.m_b < 0.0 || o.d_b < 0.0 || o.m_b > o.m_total || o.d_b > o.d_total) {
        throw ConfigError("simulate: need m_total > 0, 0 <= m_b <= m_total and 0 <= d_b <= d_total");
    }

    ReserveAllocation alloc;
    alloc.ess_droop = o.d_b;
    alloc.ess_vinertia = o.m_b;
    const double soc = o.soc.value_or(cfg.settings.soc0);
    const auto bound = energy_bound(alloc, sys.grid(), sys.horizon(), sys.ess(), soc);

    const auto trace = simulate(sc);
    write_trace_csv(dir / "trace.csv", trace);
    const auto rep = verify_bounds(trace, sys.grid(), bound);
    auto line = [](const char* name, bool ok, double margin) {
        fmt::print("{:<13} {}  margin {:+.6e}\n", name, ok ? "pass" : "FAIL", margin);
    };
    line("steady_state", rep.steady_state_ok, rep.steady_state_margin);
    line("transient", rep.transient_ok, rep.transient_margin);
    line("rocof", rep.rocof_ok, rep.rocof_margin);
    line("energy", rep.energy_ok, rep.energy_margin);
    fmt::print("required D {:.6f}  required M {:.6f}\n", min_damping(o.step_pu, sys.grid().r_ss, sys.grid().r_tr),
               min_inertia(o.step_pu, sys.grid().rocof_max));
    return rep.all_ok() ? kOk : kViolation;
}

int cmd_compare(const Options& o) {
    const RunConfig cfg = resolve(o);
    const RunData data = load_run_data(cfg);
    const auto dir = prepare_out(o.out);
    const auto cmp = compare_variants(data.system, data.history, data.realized, cfg.settings);
    write_variants_csv(dir / "variants.csv", cmp);
    int code = kOk;
    for (const auto& run : cmp.runs) {
        print_run(run);
        code = std::max(code, run_exit_code(data.system, run));
    }
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Frequency-secure energy management for autonomous power systems"};
    app.require_subcommand(1);
    app.fallthrough();

    Options o;
    app.add_option("--config", o.config, "Run configuration (JSON)");
    app.add_option("--data", o.data, "Time-series CSV, overrides the configuration");
    app.add_option("--variant", o.variant, "EMS variant: I, II or III");
    app.add_option("--seed", o.seed, "Run seed");
    app.add_option("--out", o.out, "Output directory")->capture_default_str();
    app.add_flag("--export-model", o.export_model, "Write the step-0 model as model.mps");
    app.add_option("--n-override", o.n_override, "Scenario count instead of the sample-size formula");
    app.add_option("--max-seconds", o.max_seconds, "Solver time limit per step");
    app.add_option("--steps", o.steps, "Number of EMS steps");

    auto* f = app.add_subcommand("forecast", "Write lead-1 load quantiles issued at every run step");
    auto* s = app.add_subcommand("schedule", "Rolling-horizon run: schedule.csv, kpi.json, traces/");
    auto* sim = app.add_subcommand("simulate", "Single swing simulation with a bounds report");
    auto* c = app.add_subcommand("compare", "Run variants I, II and III and write variants.csv");

    sim->add_option("--m-total", o.m_total, "Total inertia M, s")->required();
    sim->add_option("--d-total", o.d_total, "Total damping D, pu/pu")->required();
    sim->add_option("--m-b", o.m_b, "ESS virtual inertia, s");
    sim->add_option("--d-b", o.d_b, "ESS virtual droop, pu/pu");
    sim->add_option("--step", o.step_pu, "Net-load step, pu")->capture_default_str();
    sim->add_option("--t-event", o.t_event, "Step instant, s")->capture_default_str();
    sim->add_option("--duration", o.duration, "Simulated window, s")->capture_default_str();
    sim->add_option("--dt", o.dt, "Integration step, s")->capture_default_str();
    sim->add_option("--soc", o.soc, "SoC for the energy bound (default: initial SoC of the configuration)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*f) return cmd_forecast(o);
        if (*s) return cmd_schedule(o);
        if (*sim) return cmd_simulate(o);
        if (*c) return cmd_compare(o);
    } catch (const ConfigError& e) {
        fmt::print(stderr, "configuration error: {}\n", e.what());
        return kConfig;
    } catch (const IngestError& e) {
        fmt::print(stderr, "ingestion error: {}\n", e.what());
        return kConfig;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kConfig;
    }
    return kOk;
}
