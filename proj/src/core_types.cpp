#include "apsems/core_types.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "apsems/errors.hpp"

namespace apsems {

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
    std::string out = "invalid configuration";
    for (const auto& s : issues) {
        out += "\n  ";
        out += s;
    }
    return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues)
    : Error(join_issues(issues)), issues_(std::move(issues)) {}

IngestError::IngestError(const std::string& file, std::size_t line, const std::string& what)
    : Error(fmt::format("{}:{}: {}", file, line, what)), line_(line) {}

ExtractionError::ExtractionError(const std::string& what, std::vector<std::string> rows)
    : Error(what), rows_(std::move(rows)) {}

ParseError::ParseError(std::size_t line, const std::string& what)
    : Error(fmt::format("line {}: {}", line, what)), line_(line) {}

ConfigTable::ConfigTable(int n_g) : n_g_(n_g) {
    const std::size_t n_rows = std::size_t{1} << n_g;
    entries_.resize(n_rows * static_cast<std::size_t>(n_g));
    for (std::size_t j = 0; j < n_rows; ++j) {
        for (int g = 0; g < n_g; ++g) {
            const int bit = n_g - 1 - g;
            entries_[j * static_cast<std::size_t>(n_g) + static_cast<std::size_t>(g)] =
                static_cast<std::uint8_t>((j >> bit) & 1U);
        }
    }
}

std::span<const std::uint8_t> ConfigTable::row(std::size_t j) const {
    return {entries_.data() + j * static_cast<std::size_t>(n_g_), static_cast<std::size_t>(n_g_)};
}

std::size_t ConfigTable::index_of(std::span<const int> states) const {
    if (static_cast<int>(states.size()) != n_g_) {
        throw DomainError("state vector length does not match configuration table");
    }
    std::size_t j = 0;
    for (int s : states) j = (j << 1) | (s != 0 ? 1U : 0U);
    return j;
}

ConfigTable config_table(int n_g) {
    if (n_g < 1 || n_g > ConfigTable::kMaxGenerators) {
        throw ConfigError(fmt::format("n_g: {} outside supported range [1, {}]", n_g, ConfigTable::kMaxGenerators));
    }
    return ConfigTable(n_g);
}

double System::soc_per_pu_step() const noexcept {
    return horizon_.step_seconds * grid_.s_base / (3600.0 * ess_.e_max);
}

System validate_system(std::vector<GeneratorSpec> gens, EssSpec ess, GridSpec grid, HorizonSpec horizon) {
    std::vector<std::string> issues;
    auto require = [&](bool ok, const std::string& path, const std::string& what) {
        if (!ok) issues.push_back(path + ": " + what);
    };

    if (gens.empty() || static_cast<int>(gens.size()) > ConfigTable::kMaxGenerators) {
        issues.push_back(fmt::format("generators: count {} outside [1, {}]", gens.size(), ConfigTable::kMaxGenerators));
    }
    for (std::size_t g = 0; g < gens.size(); ++g) {
        const auto& gen = gens[g];
        const std::string p = fmt::format("generators[{}]", g);
        require(std::isfinite(gen.p_min) && gen.p_min >= 0.0, p + ".p_min", "must be >= 0");
        require(gen.p_min < gen.p_opt, p + ".p_opt", "p_min < p_opt violated");
        require(gen.p_opt <= gen.p_max, p + ".p_opt", "p_opt <= p_max violated");
        require(std::isfinite(gen.p_max), p + ".p_max", "must be finite");
        require(gen.droop_min >= 0.0, p + ".droop_min", "must be >= 0");
        require(gen.droop_min <= gen.default_droop, p + ".default_droop", "droop_min <= default_droop violated");
        require(gen.default_droop <= gen.droop_max, p + ".default_droop", "default_droop <= droop_max violated");
        require(gen.inertia_m > 0.0, p + ".inertia_m", "must be > 0");
        require(gen.fuel_a >= 0.0 && gen.fuel_b >= 0.0 && gen.startup_cost >= 0.0, p, "cost coefficients must be >= 0");
    }

    require(ess.soc_min >= 0.0, "ess.soc_min", "must be >= 0");
    require(ess.soc_min < ess.soc_max, "ess.soc_max", "soc_min < soc_max violated");
    require(ess.soc_max <= 1.0, "ess.soc_max", "must be <= 1");
    require(ess.lambda > 0.0 && ess.lambda < 1.0, "ess.lambda", "must lie in (0, 1)");
    require(ess.p_max > 0.0, "ess.p_max", "must be > 0");
    require(ess.e_max > 0.0, "ess.e_max", "must be > 0");
    require(ess.eta_ch > 0.0 && ess.eta_ch <= 1.0, "ess.eta_ch", "must lie in (0, 1]");
    require(ess.eta_dis > 0.0 && ess.eta_dis <= 1.0, "ess.eta_dis", "must lie in (0, 1]");
    require(ess.vinertia_max >= 0.0, "ess.vinertia_max", "must be >= 0");
    require(ess.vdroop_max >= 0.0, "ess.vdroop_max", "must be >= 0");

    require(grid.r_ss > 0.0, "grid.r_ss", "must be > 0");
    require(grid.r_ss <= grid.r_tr, "grid.r_ss", "r_ss <= r_tr violated");
    require(grid.r_tr < 1.0, "grid.r_tr", "must be < 1");
    require(grid.rocof_max > 0.0, "grid.rocof_max", "must be > 0");
    require(grid.s_base > 0.0, "grid.s_base", "must be > 0");
    require(grid.f_nom > 0.0, "grid.f_nom", "must be > 0");

    require(horizon.step_seconds > 0.0, "horizon.step_seconds", "must be > 0");
    require(horizon.k_steps >= 1, "horizon.k_steps", "must be >= 1");

    if (!issues.empty()) throw ConfigError(std::move(issues));

    System sys;
    sys.configs_ = config_table(static_cast<int>(gens.size()));
    sys.generators_ = std::move(gens);
    sys.ess_ = ess;
    sys.grid_ = grid;
    sys.horizon_ = horizon;
    return sys;
}

namespace {

using nlohmann::json;

struct FieldReader {
    std::vector<std::string>& issues;

    double number(const json& obj, const std::string& path, const char* key, std::optional<double> fallback = {}) {
        auto it = obj.find(key);
        if (it == obj.end()) {
            if (fallback) return *fallback;
            issues.push_back(path + "." + key + ": missing");
            return 0.0;
        }
        if (!it->is_number()) {
            issues.push_back(path + "." + key + ": expected a number");
            return 0.0;
        }
        return it->get<double>();
    }
};

}  // namespace

System parse_system(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("json: ") + e.what());
    }
    std::vector<std::string> issues;
    FieldReader rd{issues};

    std::vector<GeneratorSpec> gens;
    if (!doc.contains("generators") || !doc["generators"].is_array()) {
        issues.emplace_back("generators: missing array");
    } else {
        std::size_t g = 0;
        for (const auto& jg : doc["generators"]) {
            const std::string p = fmt::format("generators[{}]", g);
            GeneratorSpec gen;
            gen.name = jg.value("name", fmt::format("GT{}", g + 1));
            gen.inertia_m = rd.number(jg, p, "inertia_m");
            gen.p_min = rd.number(jg, p, "p_min");
            gen.p_max = rd.number(jg, p, "p_max");
            gen.p_opt = rd.number(jg, p, "p_opt");
            gen.droop_min = rd.number(jg, p, "droop_min");
            gen.droop_max = rd.number(jg, p, "droop_max");
            gen.default_droop = rd.number(jg, p, "default_droop");
            gen.fuel_a = rd.number(jg, p, "fuel_a");
            gen.fuel_b = rd.number(jg, p, "fuel_b");
            gen.startup_cost = rd.number(jg, p, "startup_cost");
            gens.push_back(std::move(gen));
            ++g;
        }
    }

    EssSpec ess;
    GridSpec grid;
    HorizonSpec horizon;
    const json empty = json::object();
    const json& je = doc.contains("ess") ? doc["ess"] : empty;
    if (!doc.contains("ess")) issues.emplace_back("ess: missing");
    ess.p_max = rd.number(je, "ess", "p_max");
    ess.e_max = rd.number(je, "ess", "e_max");
    ess.soc_min = rd.number(je, "ess", "soc_min");
    ess.soc_max = rd.number(je, "ess", "soc_max");
    ess.eta_ch = rd.number(je, "ess", "eta_ch", 0.95);
    ess.eta_dis = rd.number(je, "ess", "eta_dis", 0.95);
    ess.lambda = rd.number(je, "ess", "lambda");
    ess.vinertia_max = rd.number(je, "ess", "vinertia_max");
    ess.vdroop_max = rd.number(je, "ess", "vdroop_max");

    const json& jgr = doc.contains("grid") ? doc["grid"] : empty;
    if (!doc.contains("grid")) issues.emplace_back("grid: missing");
    grid.s_base = rd.number(jgr, "grid", "s_base");
    grid.f_nom = rd.number(jgr, "grid", "f_nom", 50.0);
    grid.r_ss = rd.number(jgr, "grid", "r_ss");
    grid.r_tr = rd.number(jgr, "grid", "r_tr");
    grid.rocof_max = rd.number(jgr, "grid", "rocof_max");

    const json& jh = doc.contains("horizon") ? doc["horizon"] : empty;
    if (!doc.contains("horizon")) issues.emplace_back("horizon: missing");
    horizon.step_seconds = rd.number(jh, "horizon", "step_seconds");
    horizon.k_steps = static_cast<int>(rd.number(jh, "horizon", "k_steps"));

    if (!issues.empty()) throw ConfigError(std::move(issues));
    return validate_system(std::move(gens), ess, grid, horizon);
}

System load_system(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("{}: cannot open system configuration", path.string()));
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_system(buf.str());
}

}  // namespace apsems
