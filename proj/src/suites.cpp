#include "fleetmind/suites.hpp"

#include <cstdio>

#include "fleetmind/errors.hpp"

namespace fleetmind::metrics {

SuiteKind suite_kind_from_string(const std::string& name) {
    if (name == "lifelong") return SuiteKind::Lifelong;
    if (name == "scalability") return SuiteKind::Scalability;
    if (name == "robustness") return SuiteKind::Robustness;
    if (name == "ablation") return SuiteKind::Ablation;
    throw Error(Err::CorruptScenario, "unknown suite " + name);
}

const char* to_string(SuiteKind kind) {
    switch (kind) {
        case SuiteKind::Lifelong: return "lifelong";
        case SuiteKind::Scalability: return "scalability";
        case SuiteKind::Robustness: return "robustness";
        case SuiteKind::Ablation: return "ablation";
    }
    return "?";
}

SuiteConfig suite_config_from_json(const canon::json& j) {
    SuiteConfig config;
    config.domain = j.value("domain", config.domain);
    config.levels = j.value("levels", config.levels);
    config.sqs = j.value("sqs", config.sqs);
    config.teams = j.value("teams", config.teams);
    if (j.contains("faults")) {
        config.faults.clear();
        for (const auto& item : j.at("faults"))
            config.faults.push_back(sim::fault_mode_from_string(item.get<std::string>()));
    }
    config.trials = j.value("trials", config.trials);
    config.seed = j.value("seed", config.seed);
    config.task_budget = j.value("task_budget", config.task_budget);
    return config;
}

namespace {

std::uint64_t trial_seed(std::uint64_t base, const std::string& cell, int trial) {
    return Rng::mix(base ^ Rng::mix(std::hash<std::string>{}(cell) + trial * 7919ULL));
}

RunReport run_one(const sim::Scenario& scenario) {
    sim::Simulation simulation(scenario);
    return simulation.run();
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : "-"; }

}  // namespace

SuiteResult run_suite(SuiteKind kind, const SuiteConfig& config) {
    SuiteResult result;
    std::map<std::string, std::vector<RunReport>> arm_reports;
    std::string table;

    switch (kind) {
        case SuiteKind::Lifelong: {
            for (const auto& level : config.levels) {
                for (int sq : config.sqs) {
                    std::string cell = config.domain + "/" + level + "/sq" + std::to_string(sq);
                    for (int t = 0; t < config.trials; ++t) {
                        std::uint64_t seed = trial_seed(config.seed, cell, t);
                        for (bool memory_on : {true, false}) {
                            sim::LifelongParams p;
                            p.domain = config.domain;
                            p.level = level;
                            p.sq = sq;
                            p.seed = seed;
                            p.memory_on = memory_on;
                            p.task_budget = config.task_budget;
                            arm_reports[memory_on ? "memory" : "baseline"].push_back(
                                run_one(sim::make_lifelong_scenario(p)));
                        }
                    }
                }
            }
            MetricsReport memory = compute_metrics(arm_reports.at("memory"));
            MetricsReport baseline = compute_metrics(arm_reports.at("baseline"));
            table += "cell                         MSR%/mem MSR%/base AEST/mem AEST/base\n";
            for (const auto& [key, cell] : memory.cells) {
                const MetricsCell& base = baseline.cells.at(key);
                table += key + "  " + fmt_opt(cell.msr) + "  " + fmt_opt(base.msr) + "  " +
                         fmt_opt(cell.aest) + "  " + fmt_opt(base.aest) + "\n";
            }
            break;
        }
        case SuiteKind::Scalability: {
            for (int team : config.teams) {
                std::string arm = "team" + std::to_string(team);
                for (int t = 0; t < config.trials; ++t) {
                    sim::ScalabilityParams p;
                    p.team = team;
                    p.seed = trial_seed(config.seed, "scale", t);
                    arm_reports[arm].push_back(run_one(sim::make_scalability_scenario(p)));
                }
            }
            table += "team   SR%    AEST    SS\n";
            for (int team : config.teams) {
                std::string arm = "team" + std::to_string(team);
                MetricsReport report = compute_metrics(arm_reports.at(arm));
                table += arm + "  " + fmt(report.overall.sr) + "  " +
                         fmt_opt(report.overall.aest) + "  " + fmt_opt(report.overall.ss) + "\n";
            }
            break;
        }
        case SuiteKind::Robustness: {
            for (sim::FaultMode mode : config.faults) {
                for (int t = 0; t < config.trials; ++t) {
                    std::uint64_t seed =
                        trial_seed(config.seed, std::string("fault") + sim::to_string(mode), t);
                    for (bool memory_on : {true, false}) {
                        sim::RobustnessParams p;
                        p.domain = config.domain;
                        p.mode = mode;
                        p.seed = seed;
                        p.memory_on = memory_on;
                        std::string arm =
                            std::string(memory_on ? "memory-" : "baseline-") + sim::to_string(mode);
                        arm_reports[arm].push_back(run_one(sim::make_robustness_scenario(p)));
                    }
                }
            }
            table += "mode     SR%/mem  SR%/base\n";
            for (sim::FaultMode mode : config.faults) {
                MetricsReport mem = compute_metrics(
                    arm_reports.at(std::string("memory-") + sim::to_string(mode)));
                MetricsReport base = compute_metrics(
                    arm_reports.at(std::string("baseline-") + sim::to_string(mode)));
                table += std::string(sim::to_string(mode)) + "  " + fmt(mem.overall.sr) + "  " +
                         fmt(base.overall.sr) + "\n";
            }
            break;
        }
        case SuiteKind::Ablation: {
            const std::vector<std::string> arms = {"", "spatial", "temporal", "embodiment"};
            for (const auto& ablate : arms) {
                std::string arm = ablate.empty() ? "full" : "wo_" + ablate;
                for (int t = 0; t < config.trials; ++t) {
                    sim::AblationParams p;
                    p.domain = config.domain;
                    p.ablate = ablate;
                    p.seed = trial_seed(config.seed, "ablate", t);  // paired across arms
                    arm_reports[arm].push_back(run_one(sim::make_ablation_scenario(p)));
                }
            }
            table += "arm             SR%    AEST    SS\n";
            for (const auto& ablate : arms) {
                std::string arm = ablate.empty() ? "full" : "wo_" + ablate;
                MetricsReport report = compute_metrics(arm_reports.at(arm));
                table += arm + "  " + fmt(report.overall.sr) + "  " +
                         fmt_opt(report.overall.aest) + "  " + fmt_opt(report.overall.ss) + "\n";
            }
            break;
        }
    }

    canon::json records = canon::json::object();
    for (auto& [arm, reports] : arm_reports) {
        result.arms[arm] = compute_metrics(reports);
        records[arm] = result.arms[arm];
    }
    result.table = table;
    result.records = records;
    return result;
}

}  // namespace fleetmind::metrics
