#pragma once

// Shared equipment and grid descriptions. Conventions used across the library:
//   * powers are per-unit of GridSpec::s_base,
//   * inertia constants are seconds (energy in pu*s),
//   * the frequency state is the dimensionless ratio omega / omega_nominal.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace apsems {

struct GeneratorSpec {
    std::string name;
    double inertia_m = 0.0;      // s, on system base
    double p_min = 0.0;          // pu
    double p_max = 0.0;          // pu
    double p_opt = 0.0;          // pu, preferred operating point
    double droop_min = 0.0;      // pu power / pu frequency
    double droop_max = 0.0;
    double default_droop = 0.0;  // fixed setting used when droops are not optimised
    double fuel_a = 0.0;         // cost / h while online
    double fuel_b = 0.0;         // cost / (pu h)
    double startup_cost = 0.0;   // cost / start
};

struct EssSpec {
    double p_max = 0.0;  // pu
    double e_max = 0.0;  // MWh
    double soc_min = 0.0;
    double soc_max = 1.0;
    double eta_ch = 0.95;
    double eta_dis = 0.95;
    double lambda = 0.03;        // admissible SoC-proportional energy deviation
    double vinertia_max = 0.0;   // s
    double vdroop_max = 0.0;     // pu / pu
};

struct GridSpec {
    double s_base = 1.0;     // MVA
    double f_nom = 50.0;     // Hz
    double r_ss = 0.0;       // steady-state deviation bound, pu frequency
    double r_tr = 0.0;       // transient deviation bound, pu frequency
    double rocof_max = 0.0;  // pu / s
};

struct HorizonSpec {
    double step_seconds = 900.0;
    int k_steps = 1;
};

/// All 2^n on/off patterns of n generators. Row j is the binary expansion of j
/// with generator 0 as the most significant digit.
class ConfigTable {
public:
    static constexpr int kMaxGenerators = 16;

    ConfigTable() = default;
    explicit ConfigTable(int n_g);

    int n_g() const noexcept { return n_g_; }
    std::size_t rows() const noexcept { return n_g_ == 0 ? 0 : std::size_t{1} << n_g_; }
    bool on(std::size_t j, int g) const { return entries_[j * static_cast<std::size_t>(n_g_) + static_cast<std::size_t>(g)] != 0; }
    std::span<const std::uint8_t> row(std::size_t j) const;

    /// Row index whose pattern equals the given state vector.
    std::size_t index_of(std::span<const int> states) const;

private:
    int n_g_ = 0;
    std::vector<std::uint8_t> entries_;
};

/// Throws ConfigError when n_g is outside [1, 16].
ConfigTable config_table(int n_g);

/// Immutable validated system. Only obtainable through validate_system().
class System {
public:
    const std::vector<GeneratorSpec>& generators() const noexcept { return generators_; }
    const GeneratorSpec& generator(int g) const { return generators_.at(static_cast<std::size_t>(g)); }
    int n_g() const noexcept { return static_cast<int>(generators_.size()); }
    const EssSpec& ess() const noexcept { return ess_; }
    const GridSpec& grid() const noexcept { return grid_; }
    const HorizonSpec& horizon() const noexcept { return horizon_; }
    const ConfigTable& configs() const noexcept { return configs_; }

    /// SoC change per pu of net ESS power held for one EMS step.
    double soc_per_pu_step() const noexcept;
    /// pu*s of energy that equals one MWh.
    double pu_seconds_per_mwh() const noexcept { return 3600.0 / grid_.s_base; }

private:
    friend System validate_system(std::vector<GeneratorSpec>, EssSpec, GridSpec, HorizonSpec);
    System() = default;

    std::vector<GeneratorSpec> generators_;
    EssSpec ess_;
    GridSpec grid_;
    HorizonSpec horizon_;
    ConfigTable configs_;
};

/// Checks every equipment/grid/horizon invariant; all violations are collected
/// into a single ConfigError.
System validate_system(std::vector<GeneratorSpec> gens, EssSpec ess, GridSpec grid, HorizonSpec horizon);

/// Reads `generators[]`, `ess`, `grid` and `horizon` from a JSON document.
System load_system(const std::filesystem::path& path);
System parse_system(const std::string& json_text);

}  // namespace apsems
