#pragma once

// JSON run configuration shared by the command-line tool and the tests.
//
//   {
//     "system": "system.json",            paths relative to this file
//     "data": "step_series.csv",
//     "history_points": 1920,             leading rows used to fit forecasters
//     "run":        {"steps", "variant", "seed", "threads"},
//     "initial":    {"soc", "gt_states"},
//     "scenario":   {"epsilon", "beta", "expansion_e", "n_override"},
//     "forecast":   {"n_lags", "tau", "neighbors"},
//     "weights":    {"deviation", "droop_gt", "droop_ess", "vinertia_ess", "soc_terminal"},
//     "solver":     {"max_nodes", "max_seconds", "relative_gap"},
//     "validation": {"t_event", "duration", "dt", "record_stride"}
//   }
//
// Every section and key is optional except "system" and "data". Unknown keys
// are rejected.

#include <filesystem>

#include "apsems/core_types.hpp"
#include "apsems/ems.hpp"
#include "apsems/forecast.hpp"

namespace apsems {

struct RunConfig {
    std::filesystem::path system_path;
    std::filesystem::path data_path;
    std::size_t history_points = 0;  // 0: all but `run.steps` rows
    RunSettings settings;
};

/// Throws ConfigError listing every invalid entry.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

struct RunData {
    System system;
    SeriesPair history;
    SeriesPair realized;
};

/// Loads the system and splits the series at `history_points`.
RunData load_run_data(const RunConfig& cfg);

}  // namespace apsems
