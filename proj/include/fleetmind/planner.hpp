#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fleetmind/stem.hpp"

namespace fleetmind::plan {

enum class TaskTemplate { Fetch, Deliver, Gather, PrepareServe, Package };

const char* to_string(TaskTemplate t);
TaskTemplate template_from_string(const std::string& name);

struct GlobalTask {
    std::string id;
    TaskTemplate tmpl = TaskTemplate::Fetch;
    std::string instruction;
    std::vector<std::string> items;  // categories
    std::string dest;                // carrier id
    std::string staging;             // prepare-and-serve staging carrier
    std::string container;           // package target carrier
    std::int64_t arrival = 0;
    int sq_index = 1;
    int sq_len = 1;
};

struct ToolGoal {
    std::string tool;
    std::map<std::string, std::string> args;
};

/// One workflow node: per-robot role intents, a depth layer, and the robots
/// bound to it (|robots| >= 2 marks a collaboration subtask).
struct Subtask {
    std::string description;
    std::vector<std::vector<ToolGoal>> roles;  // roles.size() == robots.size()
    int depth = 1;
    std::vector<std::string> robots;
    std::string category;  // postcondition subject, may be empty
    std::string dest;      // postcondition carrier, may be empty
    std::string hint;      // believed start location, may be empty
};

struct WorkflowGraph {
    std::string task;
    std::vector<Subtask> subtasks;

    int max_depth() const;
};

struct PlanResult {
    std::vector<std::string> trace;
    WorkflowGraph graph;
};

struct Violation {
    std::string code;
    std::string message;
    int subtask = -1;
};

struct PlannerContext {
    mem::MemoryDigest digest;
    GlobalTask task;
    const mem::MemoryState* state = nullptr;  // for distance ranking and validation
};

struct RuleSet {
    bool allow_busy_candidates = true;  // queue work on busy robots when nobody is idle
};

/// Deterministic rule-based decomposition. Throws UnknownTemplate /
/// NoCapableRobot. Every returned graph passes validate_graph.
PlanResult decompose(const PlannerContext& ctx, const RuleSet& rules = {});

std::vector<Violation> validate_graph(const WorkflowGraph& graph,
                                      const robots::EmbodimentRegistry& reg,
                                      const scene::SceneTree& tree);

struct RemoteOptions {
    std::string host = "127.0.0.1";
    int port = 0;
    std::string path = "/decompose";
    double timeout_s = 30.0;
};

/// One request/response exchange with an external planner; the response is
/// validated before acceptance and rejected as Hallucination (violations in
/// Error::details) otherwise.
PlanResult remote_decompose(const PlannerContext& ctx, const RemoteOptions& options);

canon::json request_to_json(const PlannerContext& ctx);
canon::json plan_to_json(const PlanResult& plan);
PlanResult plan_from_json(const canon::json& j, const std::string& task_id);

void to_json(canon::json& j, const GlobalTask& t);
void from_json(const canon::json& j, GlobalTask& t);

using Brain = std::function<PlanResult(const PlannerContext&)>;

}  // namespace fleetmind::plan
