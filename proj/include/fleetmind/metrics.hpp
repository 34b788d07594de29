#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fleetmind/canonical.hpp"

namespace fleetmind::metrics {

struct TaskRecord {
    std::string task;
    std::string domain;
    std::string level;
    int sq = 1;
    int sq_len = 1;
    bool completed = false;
    int steps = 0;
    std::string stage;  // failure attribution, empty when completed
};

struct RunReport {
    std::vector<TaskRecord> tasks;
    canon::json config;
    std::uint64_t seed = 0;
};

struct MetricsCell {
    int tasks = 0;
    int completed = 0;
    int sequences = 0;
    int final_completed = 0;
    long long steps_completed = 0;
    double sr = 0.0;                // %
    std::optional<double> msr;      // %, final tasks of sequences
    std::optional<double> aest;     // mean steps over completed tasks
    std::optional<double> ss;       // sr / aest, 2-decimal report convention
};

struct MetricsReport {
    MetricsCell overall;
    std::map<std::string, MetricsCell> cells;  // "domain|level|sqN"
};

/// Round to the 2-decimal report convention used for SS.
double round2(double v);

/// SR/MSR/AEST/SS over run reports. AEST averages completed tasks only and
/// is absent (with SS) when nothing completed. Throws EmptyInput.
MetricsReport compute_metrics(const std::vector<RunReport>& reports);

/// SS identity applied to an externally reported (SR, AEST) pair.
double success_per_step(double sr, double aest);

/// Failure-stage histogram over failed tasks; sums to the failure count.
std::map<std::string, int> classify_failures(const std::vector<RunReport>& reports);

/// Same, recomputed offline from run-trace lines (kind == "task_end").
std::map<std::string, int> classify_failures_from_trace(
    const std::vector<canon::json>& trace_lines);

/// Rebuilds a RunReport from persisted trace lines (pure function of the
/// trace file).
RunReport report_from_trace(const std::vector<canon::json>& trace_lines);

std::string render_cells(const MetricsReport& report);

void to_json(canon::json& j, const TaskRecord& t);
void from_json(const canon::json& j, TaskRecord& t);
void to_json(canon::json& j, const RunReport& r);
void from_json(const canon::json& j, RunReport& r);
void to_json(canon::json& j, const MetricsCell& c);
void to_json(canon::json& j, const MetricsReport& r);

}  // namespace fleetmind::metrics
