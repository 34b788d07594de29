#pragma once

#include <map>
#include <string>
#include <vector>

#include "fleetmind/metrics.hpp"
#include "fleetmind/sim.hpp"

namespace fleetmind::metrics {

enum class SuiteKind { Lifelong, Scalability, Robustness, Ablation };

SuiteKind suite_kind_from_string(const std::string& name);
const char* to_string(SuiteKind kind);

struct SuiteConfig {
    std::string domain = "HOUSEHOLD";
    std::vector<std::string> levels = {"L1", "L2"};
    std::vector<int> sqs = {1, 3, 5};
    std::vector<int> teams = {1, 3, 5};
    std::vector<sim::FaultMode> faults = {sim::FaultMode::None, sim::FaultMode::E1Offline,
                                          sim::FaultMode::E2ToolFail,
                                          sim::FaultMode::E3Hallucination};
    int trials = 40;
    std::uint64_t seed = 7;
    int task_budget = 120;
};

SuiteConfig suite_config_from_json(const canon::json& j);

/// Matched-arm experiment runner. Comparison arms consume identical derived
/// seeds, so per-cell deltas isolate the arm difference.
struct SuiteResult {
    std::map<std::string, MetricsReport> arms;
    std::string table;
    canon::json records;
};

SuiteResult run_suite(SuiteKind kind, const SuiteConfig& config);

}  // namespace fleetmind::metrics
