#include "fleetmind/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fleetmind/errors.hpp"

namespace fleetmind::metrics {

double round2(double v) { return std::round(v * 100.0) / 100.0; }

double success_per_step(double sr, double aest) {
    if (aest <= 0.0) throw Error(Err::EmptyInput, "AEST must be positive");
    return round2(sr / aest);
}

namespace {

std::string cell_key(const TaskRecord& t) {
    return t.domain + "|" + t.level + "|sq" + std::to_string(t.sq_len);
}

void fold_record(MetricsCell& cell, const TaskRecord& t) {
    ++cell.tasks;
    if (t.completed) {
        ++cell.completed;
        cell.steps_completed += t.steps;
    }
    if (t.sq == t.sq_len) {
        ++cell.sequences;
        if (t.completed) ++cell.final_completed;
    }
}

void finalize(MetricsCell& cell) {
    if (cell.tasks > 0) cell.sr = 100.0 * cell.completed / cell.tasks;
    if (cell.sequences > 0) cell.msr = 100.0 * cell.final_completed / cell.sequences;
    if (cell.completed > 0) {
        cell.aest = static_cast<double>(cell.steps_completed) / cell.completed;
        if (*cell.aest > 0.0) cell.ss = round2(cell.sr / *cell.aest);
    }
}

}  // namespace

MetricsReport compute_metrics(const std::vector<RunReport>& reports) {
    if (reports.empty()) throw Error(Err::EmptyInput, "no run reports");
    MetricsReport out;
    for (const auto& report : reports) {
        for (const auto& task : report.tasks) {
            fold_record(out.overall, task);
            fold_record(out.cells[cell_key(task)], task);
        }
    }
    if (out.overall.tasks == 0) throw Error(Err::EmptyInput, "run reports hold no tasks");
    finalize(out.overall);
    for (auto& [key, cell] : out.cells) finalize(cell);
    return out;
}

std::map<std::string, int> classify_failures(const std::vector<RunReport>& reports) {
    std::map<std::string, int> histogram;
    for (const auto& report : reports)
        for (const auto& task : report.tasks)
            if (!task.completed) ++histogram[task.stage.empty() ? "unattributed" : task.stage];
    return histogram;
}

std::map<std::string, int> classify_failures_from_trace(
    const std::vector<canon::json>& trace_lines) {
    std::map<std::string, int> histogram;
    for (const auto& line : trace_lines) {
        if (line.value("kind", std::string{}) != "task_end") continue;
        if (line.value("completed", false)) continue;
        std::string stage = line.value("stage", std::string{});
        ++histogram[stage.empty() ? "unattributed" : stage];
    }
    return histogram;
}

RunReport report_from_trace(const std::vector<canon::json>& trace_lines) {
    RunReport report;
    std::string domain, level;
    for (const auto& line : trace_lines) {
        std::string kind = line.value("kind", std::string{});
        if (kind == "run_meta") {
            domain = line.value("domain", std::string{});
            level = line.value("level", std::string{});
            report.seed = line.value("seed", std::uint64_t{0});
        } else if (kind == "task_end") {
            TaskRecord record;
            record.task = line.value("task", std::string{});
            record.domain = domain;
            record.level = level;
            record.sq = line.value("sq", 1);
            record.sq_len = line.value("sq_len", 1);
            record.completed = line.value("completed", false);
            record.steps = line.value("steps", 0);
            record.stage = line.value("stage", std::string{});
            report.tasks.push_back(std::move(record));
        }
    }
    return report;
}

std::string render_cells(const MetricsReport& report) {
    std::string out;
    char buf[160];
    auto row = [&](const std::string& name, const MetricsCell& cell) {
        std::snprintf(buf, sizeof(buf), "%-28s %5d %7.1f %8s %8s %8s\n", name.c_str(), cell.tasks,
                      cell.sr, cell.msr ? (std::to_string(round2(*cell.msr)).substr(0, 6)).c_str()
                                        : "-",
                      cell.aest ? (std::to_string(round2(*cell.aest)).substr(0, 6)).c_str() : "-",
                      cell.ss ? (std::to_string(*cell.ss).substr(0, 6)).c_str() : "-");
        out += buf;
    };
    std::snprintf(buf, sizeof(buf), "%-28s %5s %7s %8s %8s %8s\n", "cell", "n", "SR%", "MSR%",
                  "AEST", "SS");
    out += buf;
    for (const auto& [key, cell] : report.cells) row(key, cell);
    row("overall", report.overall);
    return out;
}

void to_json(canon::json& j, const TaskRecord& t) {
    j = canon::json{{"task", t.task},       {"domain", t.domain}, {"level", t.level},
                    {"sq", t.sq},           {"sq_len", t.sq_len}, {"completed", t.completed},
                    {"steps", t.steps},     {"stage", t.stage}};
}

void from_json(const canon::json& j, TaskRecord& t) {
    t.task = j.value("task", std::string{});
    t.domain = j.value("domain", std::string{});
    t.level = j.value("level", std::string{});
    t.sq = j.value("sq", 1);
    t.sq_len = j.value("sq_len", 1);
    t.completed = j.value("completed", false);
    t.steps = j.value("steps", 0);
    t.stage = j.value("stage", std::string{});
}

void to_json(canon::json& j, const RunReport& r) {
    j = canon::json{{"tasks", r.tasks}, {"config", r.config}, {"seed", r.seed}};
}

void from_json(const canon::json& j, RunReport& r) {
    r.tasks = j.value("tasks", std::vector<TaskRecord>{});
    r.config = j.value("config", canon::json::object());
    r.seed = j.value("seed", std::uint64_t{0});
}

void to_json(canon::json& j, const MetricsCell& c) {
    j = canon::json{{"tasks", c.tasks},
                    {"completed", c.completed},
                    {"sequences", c.sequences},
                    {"final_completed", c.final_completed},
                    {"sr", canon::quantize(c.sr)}};
    j["msr"] = c.msr ? canon::json(canon::quantize(*c.msr)) : canon::json(nullptr);
    j["aest"] = c.aest ? canon::json(canon::quantize(*c.aest)) : canon::json(nullptr);
    j["ss"] = c.ss ? canon::json(*c.ss) : canon::json(nullptr);
}

void to_json(canon::json& j, const MetricsReport& r) {
    canon::json cells = canon::json::object();
    for (const auto& [key, cell] : r.cells) cells[key] = cell;
    j = canon::json{{"overall", r.overall}, {"cells", cells}};
}

}  // namespace fleetmind::metrics
