#include "apsems/run_config.hpp"

#include <fmt/format.h>

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "apsems/errors.hpp"

namespace apsems {

namespace {

using nlohmann::json;

struct Reader {
    std::vector<std::string> issues;

    void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& [key, _] : obj.items()) {
            if (!ok.count(key)) issues.push_back(fmt::format("{}{}: unknown key", path.empty() ? "" : path + ".", key));
        }
    }

    const json* section(const json& doc, const char* name) {
        auto it = doc.find(name);
        if (it == doc.end()) return nullptr;
        if (!it->is_object()) {
            issues.push_back(fmt::format("{}: expected an object", name));
            return nullptr;
        }
        return &*it;
    }

    template <class T>
    void get(const json* obj, const char* path, const char* key, T& out) {
        if (!obj) return;
        auto it = obj->find(key);
        if (it == obj->end() || it->is_null()) return;
        try {
            if constexpr (std::is_arithmetic_v<T>) {
                if (!it->is_number() && !it->is_boolean()) throw std::invalid_argument("");
                if constexpr (std::is_integral_v<T>) {
                    if (!it->is_number_integer() && !it->is_number_unsigned()) throw std::invalid_argument("");
                }
            }
            out = it->get<T>();
        } catch (const std::exception&) {
            issues.push_back(fmt::format("{}.{}: wrong type", path, key));
        }
    }
};

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("json: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("run configuration must be a JSON object");

    Reader rd;
    rd.check_keys(doc, "", {"system", "data", "history_points", "run", "initial", "scenario", "forecast",
                            "weights", "solver", "validation"});
    RunConfig cfg;
    RunSettings& s = cfg.settings;

    auto path_of = [&](const char* key, std::filesystem::path& out) {
        auto it = doc.find(key);
        if (it == doc.end() || !it->is_string()) {
            rd.issues.push_back(fmt::format("{}: missing path", key));
            return;
        }
        std::filesystem::path p = it->get<std::string>();
        out = p.is_absolute() ? p : base_dir / p;
    };
    path_of("system", cfg.system_path);
    path_of("data", cfg.data_path);
    rd.get(&doc, "", "history_points", cfg.history_points);

    if (const json* run = rd.section(doc, "run")) {
        rd.check_keys(*run, "run", {"steps", "variant", "seed", "threads"});
        rd.get(run, "run", "steps", s.steps);
        rd.get(run, "run", "seed", s.seed);
        rd.get(run, "run", "threads", s.threads);
        if (run->contains("variant")) {
            try {
                s.variant = parse_variant(run->at("variant").get<std::string>());
            } catch (const std::exception&) {
                rd.issues.emplace_back("run.variant: expected I, II or III");
            }
        }
    }
    if (const json* init = rd.section(doc, "initial")) {
        rd.check_keys(*init, "initial", {"soc", "gt_states"});
        rd.get(init, "initial", "soc", s.soc0);
        rd.get(init, "initial", "gt_states", s.initial_states);
    }
    if (const json* sc = rd.section(doc, "scenario")) {
        rd.check_keys(*sc, "scenario", {"epsilon", "beta", "expansion_e", "n_override"});
        rd.get(sc, "scenario", "epsilon", s.scenario.epsilon);
        rd.get(sc, "scenario", "beta", s.scenario.beta);
        rd.get(sc, "scenario", "expansion_e", s.scenario.expansion_e);
        int n = 0;
        if (sc->contains("n_override") && !sc->at("n_override").is_null()) {
            rd.get(sc, "scenario", "n_override", n);
            s.scenario.n_override = n;
        }
    }
    if (const json* fc = rd.section(doc, "forecast")) {
        rd.check_keys(*fc, "forecast", {"n_lags", "tau", "neighbors"});
        rd.get(fc, "forecast", "n_lags", s.n_lags);
        rd.get(fc, "forecast", "tau", s.tau);
        rd.get(fc, "forecast", "neighbors", s.neighbors);
    }
    if (const json* w = rd.section(doc, "weights")) {
        rd.check_keys(*w, "weights", {"deviation", "droop_gt", "droop_ess", "vinertia_ess", "soc_terminal"});
        rd.get(w, "weights", "deviation", s.weights.deviation);
        rd.get(w, "weights", "droop_gt", s.weights.droop_gt);
        rd.get(w, "weights", "droop_ess", s.weights.droop_ess);
        rd.get(w, "weights", "vinertia_ess", s.weights.vinertia_ess);
        if (w->contains("soc_terminal") && !w->at("soc_terminal").is_null()) {
            double v = 0.0;
            rd.get(w, "weights", "soc_terminal", v);
            s.weights.soc_terminal = v;
        }
    }
    if (const json* so = rd.section(doc, "solver")) {
        rd.check_keys(*so, "solver", {"max_nodes", "max_seconds", "relative_gap"});
        rd.get(so, "solver", "max_nodes", s.limits.max_nodes);
        rd.get(so, "solver", "max_seconds", s.limits.max_seconds);
        rd.get(so, "solver", "relative_gap", s.limits.relative_gap);
    }
    if (const json* va = rd.section(doc, "validation")) {
        rd.check_keys(*va, "validation", {"t_event", "duration", "dt", "record_stride"});
        rd.get(va, "validation", "t_event", s.validation.t_event);
        rd.get(va, "validation", "duration", s.validation.duration);
        rd.get(va, "validation", "dt", s.validation.dt);
        rd.get(va, "validation", "record_stride", s.validation.record_stride);
    }

    if (s.soc0 < 0.0 || s.soc0 > 1.0) rd.issues.emplace_back("initial.soc: must lie in [0, 1]");
    for (int x : s.initial_states) {
        if (x != 0 && x != 1) rd.issues.emplace_back("initial.gt_states: entries must be 0 or 1");
    }
    if (s.n_lags < 1) rd.issues.emplace_back("forecast.n_lags: must be >= 1");
    if (s.neighbors < 1) rd.issues.emplace_back("forecast.neighbors: must be >= 1");
    if (s.limits.max_nodes < 1) rd.issues.emplace_back("solver.max_nodes: must be >= 1");
    if (!(s.limits.max_seconds > 0.0)) rd.issues.emplace_back("solver.max_seconds: must be positive");
    if (s.limits.relative_gap < 0.0) rd.issues.emplace_back("solver.relative_gap: must be >= 0");
    if (!(s.validation.dt > 0.0) || !(s.validation.duration > s.validation.t_event) || s.validation.t_event < 0.0) {
        rd.issues.emplace_back("validation: need dt > 0 and 0 <= t_event < duration");
    }
    if (s.validation.record_stride < 1) rd.issues.emplace_back("validation.record_stride: must be >= 1");
    if (s.steps < -1 || s.steps == 0) rd.issues.emplace_back("run.steps: must be positive");

    if (!rd.issues.empty()) throw ConfigError(std::move(rd.issues));
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("{}: cannot open run configuration", path.string()));
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), path.parent_path());
}

RunData load_run_data(const RunConfig& cfg) {
    RunData d{load_system(cfg.system_path), {}, {}};
    const SeriesPair all = read_series_csv(cfg.data_path);
    const std::size_t n = all.load.size();

    std::size_t hist = cfg.history_points;
    if (hist == 0) {
        if (cfg.settings.steps <= 0) throw ConfigError("history_points: required when run.steps is not set");
        hist = n - std::min(n, static_cast<std::size_t>(cfg.settings.steps));
    }
    if (hist >= n) {
        throw ConfigError(fmt::format("history_points: {} leaves no run data ({} rows)", hist, n));
    }
    auto split = [&](const TimeSeries& ts, TimeSeries& head, TimeSeries& tail) {
        head.start = ts.start;
        head.step_seconds = ts.step_seconds;
        head.values.assign(ts.values.begin(), ts.values.begin() + static_cast<std::ptrdiff_t>(hist));
        tail.start = ts.time_at(hist);
        tail.step_seconds = ts.step_seconds;
        tail.values.assign(ts.values.begin() + static_cast<std::ptrdiff_t>(hist), ts.values.end());
    };
    split(all.load, d.history.load, d.realized.load);
    split(all.wind, d.history.wind, d.realized.wind);
    return d;
}

}  // namespace apsems
