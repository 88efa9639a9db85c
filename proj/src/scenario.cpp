#include "apsems/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "apsems/errors.hpp"

namespace apsems {

void validate(const ScenarioParams& p) {
    std::vector<std::string> issues;
    if (!(p.epsilon > 0.0 && p.epsilon < 1.0)) issues.emplace_back("scenario.epsilon: must lie in (0, 1)");
    if (!(p.beta > 0.0 && p.beta < 1.0)) issues.emplace_back("scenario.beta: must lie in (0, 1)");
    if (!(p.expansion_e > 1.0)) issues.emplace_back("scenario.expansion_e: must be > 1");
    if (p.n_override && *p.n_override < 1) issues.emplace_back("scenario.n_override: must be >= 1");
    if (!issues.empty()) throw ConfigError(std::move(issues));
}

double scenario_bound(const ScenarioParams& p, int horizon) {
    const double e = p.expansion_e;
    return (1.0 / p.epsilon) * (e / (e - 1.0)) * (std::log(1.0 / p.beta) + 4.0 * horizon - 1.0);
}

int scenario_count(const ScenarioParams& p, int horizon) {
    return static_cast<int>(std::ceil(scenario_bound(p, horizon)));
}

std::uint64_t scenario_seed(std::uint64_t run_seed, std::uint64_t index) {
    // splitmix64 finaliser over (seed, index)
    std::uint64_t z = run_seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double to_unit_open(std::uint64_t bits) {
    return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

std::vector<std::vector<double>> perturbations_from(const std::vector<double>& xi,
                                                    const std::vector<std::vector<double>>& samples) {
    std::vector<std::vector<double>> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].size() + 1 > xi.size()) throw DomainError("sample horizon exceeds forecast horizon");
        out[i].resize(samples[i].size());
        for (std::size_t k = 0; k < samples[i].size(); ++k) out[i][k] = std::abs(xi[k] - samples[i][k]);
    }
    return out;
}

int env_thread_cap() {
    if (const char* v = std::getenv("EMS_THREADS")) {
        const int n = std::atoi(v);
        if (n >= 1) return n;
    }
    return static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
}

ScenarioSet draw_scenarios(const NetLoadForecast& fc, int n, std::uint64_t seed, int threads) {
    if (n < 1) throw DomainError("scenario count must be >= 1");
    const int horizon = fc.horizon();
    ScenarioSet set;
    set.seed = seed;
    set.samples.assign(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(horizon)));

    auto draw_range = [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            std::mt19937_64 rng(scenario_seed(seed, static_cast<std::uint64_t>(i)));
            auto& row = set.samples[static_cast<std::size_t>(i)];
            for (int k = 1; k <= horizon; ++k) {
                const double load = sample_inverse_cdf(fc.load, k, to_unit_open(rng()));
                const double ren = sample_inverse_cdf(fc.renewable, k, to_unit_open(rng()));
                row[static_cast<std::size_t>(k - 1)] = (load - ren) / fc.s_base;
            }
        }
    };

    const int workers = std::clamp(threads > 0 ? threads : env_thread_cap(), 1, n);
    if (workers == 1) {
        draw_range(0, n);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (n + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const int b = w * chunk;
            const int e = std::min(n, b + chunk);
            if (b < e) pool.emplace_back(draw_range, b, e);
        }
        for (auto& t : pool) t.join();
    }
    set.perturbations = perturbations_from(fc.xi, set.samples);
    return set;
}

double worst_case_perturbation(const ScenarioSet& set, int k) {
    if (k < 0 || k >= set.horizon()) throw DomainError(fmt::format("step {} outside 0..{}", k, set.horizon() - 1));
    double worst = 0.0;
    for (const auto& row : set.perturbations) worst = std::max(worst, row[static_cast<std::size_t>(k)]);
    return worst;
}

double worst_case_perturbation(const ScenarioSet& set) {
    double worst = 0.0;
    for (int k = 0; k < set.horizon(); ++k) worst = std::max(worst, worst_case_perturbation(set, k));
    return worst;
}

void write_scenarios_csv(const std::filesystem::path& path, const ScenarioSet& set) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "scenario,k,delta_pu,perturbation_pu\n";
    for (int i = 0; i < set.count(); ++i) {
        for (int k = 0; k < set.horizon(); ++k) {
            out << fmt::format("{},{},{:.17g},{:.17g}\n", i, k, set.samples[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)],
                               set.perturbations[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);
        }
    }
}

ScenarioSet read_scenarios_csv(const std::filesystem::path& path) {
    const std::string file = path.string();
    std::ifstream in(path);
    if (!in) throw IngestError(file, 0, "cannot open file");
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line) || line != "scenario,k,delta_pu,perturbation_pu") {
        throw IngestError(file, 1, "expected header 'scenario,k,delta_pu,perturbation_pu'");
    }
    std::map<std::pair<int, int>, std::pair<double, double>> cells;
    int max_i = -1;
    int max_k = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b, c, d;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ',') || !std::getline(ss, d)) {
            throw IngestError(file, line_no, "expected 4 columns");
        }
        try {
            const int i = std::stoi(a);
            const int k = std::stoi(b);
            if (i < 0 || k < 0) throw std::invalid_argument("negative index");
            const double pert = std::stod(d);
            if (pert < 0.0) throw IngestError(file, line_no, "perturbation must be >= 0");
            cells[{i, k}] = {std::stod(c), pert};
            max_i = std::max(max_i, i);
            max_k = std::max(max_k, k);
        } catch (const IngestError&) {
            throw;
        } catch (const std::exception&) {
            throw IngestError(file, line_no, "malformed row '" + line + "'");
        }
    }
    const auto n = static_cast<std::size_t>(max_i + 1);
    const auto horizon = static_cast<std::size_t>(max_k + 1);
    if (n == 0 || cells.size() != n * horizon) throw IngestError(file, line_no, "incomplete scenario grid");
    ScenarioSet set;
    set.samples.assign(n, std::vector<double>(horizon));
    set.perturbations.assign(n, std::vector<double>(horizon));
    for (const auto& [key, val] : cells) {
        set.samples[static_cast<std::size_t>(key.first)][static_cast<std::size_t>(key.second)] = val.first;
        set.perturbations[static_cast<std::size_t>(key.first)][static_cast<std::size_t>(key.second)] = val.second;
    }
    return set;
}

}  // namespace apsems
