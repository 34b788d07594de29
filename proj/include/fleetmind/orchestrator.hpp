#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "fleetmind/outcome.hpp"
#include "fleetmind/planner.hpp"
#include "fleetmind/rng.hpp"
#include "fleetmind/stem.hpp"

namespace fleetmind::orch {

enum class SubtaskState { Pending, Ready, Running, Done, Failed, Replanned };

const char* to_string(SubtaskState s);

enum class FailureCause {
    None,
    RobotOffline,      // E1
    ToolFailure,       // E2
    Hallucination,     // E3
    BudgetExhausted,
    SearchExhausted,
    NoCapableRobot,
    RecoveryExhausted,
};

const char* to_string(FailureCause c);

/// Pipeline stage a terminal failure is attributed to.
std::string failure_stage(FailureCause cause, const std::string& last_fail_kind);

struct SubtaskRef {
    std::string task;
    int index = 0;

    auto operator<=>(const SubtaskRef&) const = default;
};

struct RoleRuntime {
    std::size_t cursor = 0;
    std::deque<plan::ToolGoal> injected;    // recovery steps run before the cursor goal
    std::set<std::string> visited;          // searched carriers (temporal memory)
    std::set<std::string> self_opened;      // doors this role opened and should re-close
    std::vector<std::string> sweep_order;   // memory-less fallback
    std::size_t sweep_cursor = 0;
    bool sweep_ready = false;
    int goal_retries = 0;
    int rearms = 0;
    bool done = false;
};

struct SubtaskRuntime {
    SubtaskRef ref;
    plan::Subtask spec;
    SubtaskState state = SubtaskState::Pending;
    int budget = 0;
    int steps = 0;
    int reassignments = 0;
    FailureCause fail_cause = FailureCause::None;
    std::vector<RoleRuntime> roles;
};

struct DispatchDecision {
    std::int64_t tick = 0;
    std::vector<SubtaskRef> batch;
    std::string rationale;
};

/// Depth-layer dispatcher. Tracks graph/subtask states only; robot
/// availability and claims go through the hooks so the same machine can be
/// driven by the live kernel or by a scripted test harness.
class Monitor {
public:
    struct Hooks {
        std::function<robots::Availability(const std::string&)> availability;
        std::function<void(const std::string&, bool)> set_busy;
    };

    explicit Monitor(Hooks hooks) : hooks_(std::move(hooks)) {}

    void submit(const plan::WorkflowGraph& graph, int budget_per_subtask);

    /// Promotes Pending -> Ready at each graph's frontier depth and
    /// dispatches Ready subtasks whose robots are all Idle. Same-depth
    /// subtasks across graphs may dispatch in one tick; graphs are served
    /// FIFO.
    std::vector<DispatchDecision> step(std::int64_t tick);

    void complete(const SubtaskRef& ref);
    void fail(const SubtaskRef& ref, FailureCause cause);
    /// Swaps one robot of a Ready/Running/Failed subtask and re-queues it.
    void reassign(const SubtaskRef& ref, const std::string& from_robot,
                  const std::string& to_robot);
    /// Supersedes every unfinished subtask of the task (marked Replanned)
    /// and installs the new graph under the same task id.
    void replace_graph(const plan::WorkflowGraph& graph, int budget_per_subtask);
    void close_task(std::string task);

    bool has_task(const std::string& task) const { return graphs_.count(task) > 0; }
    bool valid(const SubtaskRef& ref) const;
    bool graph_done(const std::string& task) const;
    SubtaskRuntime& runtime(const SubtaskRef& ref);
    const SubtaskRuntime& runtime(const SubtaskRef& ref) const;
    std::vector<SubtaskRef> running() const;
    std::vector<SubtaskRef> in_state(SubtaskState state) const;
    const std::vector<SubtaskRuntime>& archived() const { return archive_; }
    std::vector<std::string> active_tasks() const { return order_; }

private:
    struct GraphRuntime {
        plan::WorkflowGraph graph;
        std::vector<SubtaskRuntime> subtasks;
        bool closed = false;
    };

    int frontier_depth(const GraphRuntime& g) const;

    Hooks hooks_;
    std::vector<std::string> order_;  // FIFO
    std::map<std::string, GraphRuntime> graphs_;
    std::vector<SubtaskRuntime> archive_;  // superseded runtimes
};

struct OrchestratorConfig {
    int subtask_budget = 40;
    int task_budget = 120;
    int retry_budget = 2;
    int replan_budget = 2;
    bool use_spatial = true;
    bool use_temporal = true;
    bool use_embodiment = true;
    std::uint64_t seed = 1;
};

struct TaskRuntime {
    plan::GlobalTask task;
    int replans_left = 0;
    int steps = 0;
    int plan_count = 0;
    bool terminal = false;
    bool completed = false;
    FailureCause cause = FailureCause::None;
    std::string last_fail_kind;
    std::int64_t finished_tick = -1;
};

/// Monitor plus per-subtask agents: plans through the brain, dispatches by
/// depth, runs one tool call per robot per tick, and recovers from E1/E2/E3
/// through reassignment and re-planning. All state flows through the kernel
/// event log.
class Orchestrator {
public:
    Orchestrator(mem::Kernel& kernel, sim::ToolBackend& backend, plan::Brain brain,
                 OrchestratorConfig config);

    /// Plans and enqueues the task. Returns false when planning failed
    /// terminally (task recorded as failed with zero dispatches).
    bool submit_task(const plan::GlobalTask& task);

    /// One scheduler-plus-agents pass at `tick`.
    void step(std::int64_t tick);

    bool task_terminal(const std::string& task) const;
    const TaskRuntime& task_runtime(const std::string& task) const;
    const std::map<std::string, TaskRuntime>& tasks() const { return tasks_; }
    Monitor& monitor() { return monitor_; }

    /// Trace sink: one canonical json object per dispatch/tool/plan event.
    void set_trace(std::vector<canon::json>* sink) { trace_ = sink; }

private:
    plan::PlannerContext make_context(const plan::GlobalTask& task) const;
    void emit(canon::json line);
    void log_plan_failure(const std::string& task_id, const std::vector<std::string>& violations);
    std::vector<std::string> pre_queue_for(const std::string& task_id, int below_depth) const;
    void finish_task(std::string task_id, bool completed, FailureCause cause);
    bool role_step(SubtaskRuntime& rt, std::size_t role_index, std::int64_t tick);
    bool postcondition_met(const SubtaskRuntime& rt) const;
    void handle_failure(SubtaskRef ref, FailureCause cause);
    bool try_reassign(const SubtaskRef& ref, const std::string& lost_robot,
                      const std::set<std::string>& exclude);
    bool replan_task(const std::string& task_id);
    std::optional<std::string> next_search_target(SubtaskRuntime& rt, RoleRuntime& role,
                                                  const std::string& category,
                                                  const std::string& robot);
    void record_tool_event(SubtaskRuntime& rt, const std::string& robot,
                           const plan::ToolGoal& goal, const sim::ToolOutcome& outcome,
                           std::int64_t tick);

    mem::Kernel& kernel_;
    sim::ToolBackend& backend_;
    plan::Brain brain_;
    OrchestratorConfig config_;
    Monitor monitor_;
    std::map<std::string, TaskRuntime> tasks_;
    std::vector<canon::json>* trace_ = nullptr;
    Rng rng_;
};

}  // namespace fleetmind::orch
