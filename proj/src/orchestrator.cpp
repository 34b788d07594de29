#include "fleetmind/orchestrator.hpp"

#include <algorithm>

#include "fleetmind/errors.hpp"

namespace fleetmind::orch {

const char* to_string(SubtaskState s) {
    switch (s) {
        case SubtaskState::Pending: return "PENDING";
        case SubtaskState::Ready: return "READY";
        case SubtaskState::Running: return "RUNNING";
        case SubtaskState::Done: return "DONE";
        case SubtaskState::Failed: return "FAILED";
        case SubtaskState::Replanned: return "REPLANNED";
    }
    return "?";
}

const char* to_string(FailureCause c) {
    switch (c) {
        case FailureCause::None: return "";
        case FailureCause::RobotOffline: return "E1_OFFLINE";
        case FailureCause::ToolFailure: return "E2_TOOL_FAIL";
        case FailureCause::Hallucination: return "E3_HALLUCINATION";
        case FailureCause::BudgetExhausted: return "BUDGET_EXHAUSTED";
        case FailureCause::SearchExhausted: return "SEARCH_EXHAUSTED";
        case FailureCause::NoCapableRobot: return "NO_CAPABLE_ROBOT";
        case FailureCause::RecoveryExhausted: return "RECOVERY_EXHAUSTED";
    }
    return "?";
}

std::string failure_stage(FailureCause cause, const std::string& last_fail_kind) {
    switch (cause) {
        case FailureCause::None:
            return "";
        case FailureCause::Hallucination:
        case FailureCause::NoCapableRobot:
            return "subtask-generation";
        case FailureCause::RobotOffline:
        case FailureCause::ToolFailure:
            return "tool-invocation";
        case FailureCause::SearchExhausted:
            return "memory-operation";
        case FailureCause::BudgetExhausted:
        case FailureCause::RecoveryExhausted:
            if (last_fail_kind == sim::kNoObject || last_fail_kind == sim::kClosed ||
                last_fail_kind == sim::kNotAtCarrier)
                return "memory-operation";
            if (last_fail_kind == sim::kToolBroken || last_fail_kind == sim::kCapabilityMissing ||
                last_fail_kind == sim::kNotHolding || last_fail_kind == sim::kGripperFull)
                return "tool-invocation";
            return "unattributed";
    }
    return "unattributed";
}

// ---- Monitor ----

void Monitor::submit(const plan::WorkflowGraph& graph, int budget_per_subtask) {
    GraphRuntime g;
    g.graph = graph;
    for (std::size_t i = 0; i < graph.subtasks.size(); ++i) {
        SubtaskRuntime rt;
        rt.ref = {graph.task, static_cast<int>(i)};
        rt.spec = graph.subtasks[i];
        rt.budget = budget_per_subtask;
        rt.roles.resize(rt.spec.roles.size());
        g.subtasks.push_back(std::move(rt));
    }
    if (!graphs_.count(graph.task)) order_.push_back(graph.task);
    graphs_[graph.task] = std::move(g);
}

int Monitor::frontier_depth(const GraphRuntime& g) const {
    int frontier = 0;
    for (int depth = 1; depth <= g.graph.max_depth(); ++depth) {
        bool all_done = true;
        bool any_at_depth = false;
        for (const auto& rt : g.subtasks) {
            if (rt.spec.depth != depth) continue;
            any_at_depth = true;
            if (rt.state != SubtaskState::Done) all_done = false;
        }
        if (any_at_depth && !all_done) return depth;
        frontier = depth;
    }
    return frontier + 1;  // everything done
}

std::vector<DispatchDecision> Monitor::step(std::int64_t tick) {
    std::vector<DispatchDecision> decisions;
    for (const auto& task : order_) {
        GraphRuntime& g = graphs_.at(task);
        if (g.closed) continue;
        int depth = frontier_depth(g);

        DispatchDecision decision;
        decision.tick = tick;
        for (auto& rt : g.subtasks) {
            if (rt.spec.depth != depth) continue;
            if (rt.state == SubtaskState::Pending) rt.state = SubtaskState::Ready;
            if (rt.state != SubtaskState::Ready) continue;

            bool all_idle = true;
            for (const auto& robot : rt.spec.robots) {
                if (hooks_.availability(robot) != robots::Availability::Idle) {
                    all_idle = false;
                    break;
                }
            }
            if (!all_idle) continue;  // collaboration gate / contention: wait

            for (const auto& robot : rt.spec.robots) hooks_.set_busy(robot, true);
            rt.state = SubtaskState::Running;
            decision.batch.push_back(rt.ref);
        }
        if (!decision.batch.empty()) {
            decision.rationale = "task " + task + " depth " + std::to_string(depth);
            decisions.push_back(std::move(decision));
        }
    }
    return decisions;
}

SubtaskRuntime& Monitor::runtime(const SubtaskRef& ref) {
    auto it = graphs_.find(ref.task);
    if (it == graphs_.end()) throw Error(Err::UnknownNode, "no graph for task " + ref.task);
    return it->second.subtasks.at(static_cast<std::size_t>(ref.index));
}

const SubtaskRuntime& Monitor::runtime(const SubtaskRef& ref) const {
    return const_cast<Monitor*>(this)->runtime(ref);
}

void Monitor::complete(const SubtaskRef& ref) {
    SubtaskRuntime& rt = runtime(ref);
    if (rt.state == SubtaskState::Running)
        for (const auto& robot : rt.spec.robots) hooks_.set_busy(robot, false);
    rt.state = SubtaskState::Done;
}

void Monitor::fail(const SubtaskRef& ref, FailureCause cause) {
    SubtaskRuntime& rt = runtime(ref);
    if (rt.state == SubtaskState::Running)
        for (const auto& robot : rt.spec.robots) hooks_.set_busy(robot, false);
    rt.state = SubtaskState::Failed;
    rt.fail_cause = cause;
}

void Monitor::reassign(const SubtaskRef& ref, const std::string& from_robot,
                       const std::string& to_robot) {
    SubtaskRuntime& rt = runtime(ref);
    if (rt.state == SubtaskState::Running)
        for (const auto& robot : rt.spec.robots)
            if (robot != from_robot) hooks_.set_busy(robot, false);
    for (std::size_t k = 0; k < rt.spec.robots.size(); ++k) {
        if (rt.spec.robots[k] != from_robot) continue;
        rt.spec.robots[k] = to_robot;
        RoleRuntime fresh;
        fresh.visited = rt.roles[k].visited;  // searched ground carries over
        rt.roles[k] = std::move(fresh);
    }
    rt.state = SubtaskState::Ready;
    rt.fail_cause = FailureCause::None;
    ++rt.reassignments;
    // graph copy stays in sync for replace/inspection
    graphs_.at(ref.task).graph.subtasks.at(static_cast<std::size_t>(ref.index)).robots =
        rt.spec.robots;
}

void Monitor::replace_graph(const plan::WorkflowGraph& graph, int budget_per_subtask) {
    auto it = graphs_.find(graph.task);
    if (it != graphs_.end()) {
        for (auto& rt : it->second.subtasks) {
            if (rt.state == SubtaskState::Running)
                for (const auto& robot : rt.spec.robots) hooks_.set_busy(robot, false);
            if (rt.state != SubtaskState::Done) rt.state = SubtaskState::Replanned;
            archive_.push_back(rt);
        }
        graphs_.erase(it);
        order_.erase(std::remove(order_.begin(), order_.end(), graph.task), order_.end());
    }
    submit(graph, budget_per_subtask);
}

void Monitor::close_task(std::string task) {
    auto it = graphs_.find(task);
    if (it == graphs_.end()) return;
    for (auto& rt : it->second.subtasks) {
        if (rt.state == SubtaskState::Running)
            for (const auto& robot : rt.spec.robots) hooks_.set_busy(robot, false);
        if (rt.state == SubtaskState::Pending || rt.state == SubtaskState::Ready ||
            rt.state == SubtaskState::Running) {
            rt.state = SubtaskState::Failed;
            if (rt.fail_cause == FailureCause::None)
                rt.fail_cause = FailureCause::RecoveryExhausted;
        }
        archive_.push_back(rt);
    }
    graphs_.erase(it);
    order_.erase(std::remove(order_.begin(), order_.end(), task), order_.end());
}

bool Monitor::valid(const SubtaskRef& ref) const {
    auto it = graphs_.find(ref.task);
    return it != graphs_.end() && ref.index >= 0 &&
           static_cast<std::size_t>(ref.index) < it->second.subtasks.size();
}

bool Monitor::graph_done(const std::string& task) const {
    auto it = graphs_.find(task);
    if (it == graphs_.end()) return false;
    for (const auto& rt : it->second.subtasks)
        if (rt.state != SubtaskState::Done) return false;
    return true;
}

std::vector<SubtaskRef> Monitor::running() const { return in_state(SubtaskState::Running); }

std::vector<SubtaskRef> Monitor::in_state(SubtaskState state) const {
    std::vector<SubtaskRef> out;
    for (const auto& task : order_) {
        const GraphRuntime& g = graphs_.at(task);
        for (const auto& rt : g.subtasks)
            if (rt.state == state) out.push_back(rt.ref);
    }
    return out;
}

// ---- Orchestrator ----

Orchestrator::Orchestrator(mem::Kernel& kernel, sim::ToolBackend& backend, plan::Brain brain,
                           OrchestratorConfig config)
    : kernel_(kernel),
      backend_(backend),
      brain_(std::move(brain)),
      config_(config),
      monitor_(Monitor::Hooks{
          [this](const std::string& robot) {
              auto it = kernel_.state().embodiment.find(robot);
              return it == kernel_.state().embodiment.end() ? robots::Availability::Offline
                                                            : it->second.availability;
          },
          [this](const std::string& robot, bool busy) {
              mem::Event event;
              event.embodiment = robots::make_availability(
                  robot, busy ? robots::Availability::Busy : robots::Availability::Idle);
              kernel_.append(std::move(event));
          }}),
      rng_(config.seed) {}

void Orchestrator::emit(canon::json line) {
    if (trace_) trace_->push_back(std::move(line));
}

plan::PlannerContext Orchestrator::make_context(const plan::GlobalTask& task) const {
    mem::DigestScope scope;
    scope.task = task.id;
    for (const auto& item : task.items) scope.categories.insert(item);
    const mem::MemoryState& state = kernel_.state();
    for (const std::string& carrier : {task.dest, task.staging, task.container}) {
        if (!carrier.empty() && state.spatial.contains(carrier))
            scope.regions.insert(state.spatial.at(carrier).parent);
    }

    plan::PlannerContext ctx;
    ctx.digest = mem::build_digest(state, scope);
    if (!config_.use_spatial) ctx.digest.spatial_summary = canon::json::array();
    if (!config_.use_temporal) ctx.digest.feedback.clear();
    if (!config_.use_embodiment) ctx.digest.roster = canon::json::array();
    ctx.task = task;
    ctx.state = &state;
    return ctx;
}

std::vector<std::string> Orchestrator::pre_queue_for(const std::string& task_id,
                                                     int below_depth) const {
    std::vector<std::string> out;
    if (!monitor_.has_task(task_id)) return out;
    const Monitor& m = monitor_;
    for (SubtaskState s : {SubtaskState::Pending, SubtaskState::Ready, SubtaskState::Running}) {
        for (const auto& ref : m.in_state(s)) {
            if (ref.task != task_id) continue;
            const SubtaskRuntime& rt = m.runtime(ref);
            if (rt.spec.depth < below_depth)
                out.push_back(task_id + ":" + std::to_string(ref.index));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void Orchestrator::log_plan_failure(const std::string& task_id,
                                    const std::vector<std::string>& violations) {
    std::string feedback = "plan rejected";
    for (const auto& v : violations) feedback += "; " + v;
    mem::Event event;
    event.task = task_id;
    mem::ToolCallRecord record;
    record.tool = "plan";
    record.status = mem::ToolStatus::Fail;
    record.feedback = feedback;
    event.tools.push_back(std::move(record));
    kernel_.append(std::move(event));
    emit(canon::json{{"kind", "plan_reject"},
                     {"tick", kernel_.tick()},
                     {"task", task_id},
                     {"violations", violations}});
}

bool Orchestrator::submit_task(const plan::GlobalTask& task) {
    TaskRuntime runtime;
    runtime.task = task;
    runtime.replans_left = config_.replan_budget;
    tasks_[task.id] = std::move(runtime);

    TaskRuntime& rt = tasks_.at(task.id);
    while (true) {
        plan::PlanResult plan;
        try {
            plan = brain_(make_context(task));
        } catch (const Error& e) {
            if (e.code() == Err::Hallucination && rt.replans_left > 0) {
                --rt.replans_left;
                log_plan_failure(task.id, e.details());
                continue;
            }
            rt.cause = e.code() == Err::Hallucination ? FailureCause::Hallucination
                                                      : FailureCause::NoCapableRobot;
            finish_task(task.id, false, rt.cause);
            return false;
        }

        auto violations =
            plan::validate_graph(plan.graph, kernel_.state().embodiment, kernel_.state().spatial);
        if (!violations.empty()) {
            std::vector<std::string> lines;
            for (const auto& v : violations) lines.push_back(v.code + ": " + v.message);
            if (rt.replans_left > 0) {
                --rt.replans_left;
                log_plan_failure(task.id, lines);
                continue;
            }
            finish_task(task.id, false, FailureCause::Hallucination);
            return false;
        }

        ++rt.plan_count;
        monitor_.submit(plan.graph, config_.subtask_budget);
        emit(canon::json{{"kind", rt.plan_count == 1 ? "plan" : "replan"},
                         {"tick", kernel_.tick()},
                         {"task", task.id},
                         {"subtasks", plan.graph.subtasks.size()},
                         {"depths", plan.graph.max_depth()},
                         {"trace", plan.trace}});
        return true;
    }
}

bool Orchestrator::replan_task(const std::string& task_id) {
    TaskRuntime& rt = tasks_.at(task_id);
    while (rt.replans_left > 0) {
        --rt.replans_left;
        plan::PlanResult plan;
        try {
            plan = brain_(make_context(rt.task));
        } catch (const Error& e) {
            if (e.code() == Err::Hallucination) {
                log_plan_failure(task_id, e.details());
                continue;
            }
            return false;
        }
        auto violations =
            plan::validate_graph(plan.graph, kernel_.state().embodiment, kernel_.state().spatial);
        if (!violations.empty()) {
            std::vector<std::string> lines;
            for (const auto& v : violations) lines.push_back(v.code + ": " + v.message);
            log_plan_failure(task_id, lines);
            continue;
        }
        ++rt.plan_count;
        monitor_.replace_graph(plan.graph, config_.subtask_budget);
        emit(canon::json{{"kind", "replan"},
                         {"tick", kernel_.tick()},
                         {"task", task_id},
                         {"subtasks", plan.graph.subtasks.size()},
                         {"trace", plan.trace}});
        return true;
    }
    return false;
}

void Orchestrator::finish_task(std::string task_id, bool completed, FailureCause cause) {
    TaskRuntime& rt = tasks_.at(task_id);
    if (rt.terminal) return;
    rt.terminal = true;
    rt.completed = completed;
    rt.cause = completed ? FailureCause::None : cause;
    rt.finished_tick = kernel_.tick();
    monitor_.close_task(task_id);
    emit(canon::json{{"kind", "task_end"},
                     {"tick", kernel_.tick()},
                     {"task", task_id},
                     {"completed", completed},
                     {"steps", rt.steps},
                     {"cause", to_string(rt.cause)},
                     {"stage", failure_stage(rt.cause, rt.last_fail_kind)},
                     {"sq", rt.task.sq_index},
                     {"sq_len", rt.task.sq_len}});
}

bool Orchestrator::task_terminal(const std::string& task) const {
    auto it = tasks_.find(task);
    return it != tasks_.end() && it->second.terminal;
}

const TaskRuntime& Orchestrator::task_runtime(const std::string& task) const {
    return tasks_.at(task);
}

bool Orchestrator::try_reassign(const SubtaskRef& ref, const std::string& lost_robot,
                                const std::set<std::string>& exclude) {
    SubtaskRuntime& rt = monitor_.runtime(ref);
    std::size_t role_index = 0;
    for (std::size_t k = 0; k < rt.spec.robots.size(); ++k)
        if (rt.spec.robots[k] == lost_robot) role_index = k;

    std::set<std::string> tools;
    for (const auto& goal : rt.spec.roles[role_index]) tools.insert(goal.tool);
    if (tools.empty()) tools.insert("navigate");

    std::string near = rt.spec.hint.empty() ? rt.spec.dest : rt.spec.hint;
    auto candidates = robots::find_capable(kernel_.state().embodiment, kernel_.state().spatial,
                                           *tools.begin(), near, /*include_busy=*/true);
    for (const auto& candidate : candidates) {
        if (exclude.count(candidate)) continue;
        bool ok = true;
        const auto& caps = kernel_.state().embodiment.at(candidate).capabilities;
        for (const auto& tool : tools)
            if (!caps.count(tool)) ok = false;
        if (!ok) continue;
        monitor_.reassign(ref, lost_robot, candidate);
        emit(canon::json{{"kind", "recover"},
                         {"tick", kernel_.tick()},
                         {"task", ref.task},
                         {"subtask", ref.index},
                         {"action", "reassign"},
                         {"from", lost_robot},
                         {"to", candidate}});
        return true;
    }
    return false;
}

void Orchestrator::handle_failure(SubtaskRef ref, FailureCause cause) {
    SubtaskRuntime snapshot = monitor_.runtime(ref);
    TaskRuntime& task_rt = tasks_.at(ref.task);
    monitor_.fail(ref, cause);
    emit(canon::json{{"kind", "subtask_failed"},
                     {"tick", kernel_.tick()},
                     {"task", ref.task},
                     {"subtask", ref.index},
                     {"cause", to_string(cause)}});

    if (cause == FailureCause::BudgetExhausted || cause == FailureCause::SearchExhausted) {
        finish_task(ref.task, false, cause);
        return;
    }

    // Recovery needs execution history; without temporal memory the task is
    // lost the moment a robot or tool is.
    if (!config_.use_temporal) {
        finish_task(ref.task, false, cause);
        return;
    }

    if (cause == FailureCause::RobotOffline || cause == FailureCause::ToolFailure) {
        std::set<std::string> exclude;
        std::string lost;
        const auto& reg = kernel_.state().embodiment;
        if (cause == FailureCause::RobotOffline) {
            for (const auto& robot : snapshot.spec.robots) {
                auto it = reg.find(robot);
                if (it == reg.end() || it->second.availability == robots::Availability::Offline) {
                    lost = robot;
                    exclude.insert(robot);
                }
            }
        } else {
            lost = snapshot.spec.robots.front();  // single-robot tool chains
            for (std::size_t k = 0; k < snapshot.roles.size(); ++k)
                if (snapshot.roles[k].goal_retries > config_.retry_budget)
                    lost = snapshot.spec.robots[k];
            exclude.insert(lost);
        }
        for (const auto& robot : snapshot.spec.robots)
            if (robot != lost) exclude.insert(robot);

        if (!lost.empty() && try_reassign(ref, lost, exclude)) return;
        if (replan_task(ref.task)) {
            emit(canon::json{{"kind", "recover"},
                             {"tick", kernel_.tick()},
                             {"task", ref.task},
                             {"subtask", ref.index},
                             {"action", "replan"}});
            return;
        }
        task_rt.cause = cause;
        finish_task(ref.task, false, FailureCause::RecoveryExhausted);
        return;
    }

    finish_task(ref.task, false, cause);
}

bool Orchestrator::postcondition_met(const SubtaskRuntime& rt) const {
    const mem::MemoryState& state = kernel_.state();
    const std::string& category = rt.spec.category;
    const std::string& dest = rt.spec.dest;

    if (!category.empty() && !dest.empty()) {
        if (!state.spatial.contains(dest)) return false;
        for (const auto& [oid, obj] : state.spatial.at(dest).graph.nodes)
            if (obj.category == category) return true;
        return false;
    }
    if (!category.empty()) {
        // retrieve/stage: the item left every carrier graph (held by the arm)
        for (const auto& [id, node] : state.spatial.nodes)
            for (const auto& [oid, obj] : node.graph.nodes)
                if (obj.category == category) return false;
        return true;
    }
    if (!dest.empty()) {
        if (!state.spatial.contains(dest)) return false;
        auto it = state.spatial.at(dest).state.find("door");
        return it == state.spatial.at(dest).state.end() || it->second == "open";
    }
    return true;
}

std::optional<std::string> Orchestrator::next_search_target(SubtaskRuntime& rt, RoleRuntime& role,
                                                            const std::string& category,
                                                            const std::string& robot) {
    const mem::MemoryState& state = kernel_.state();
    if (config_.use_spatial) {
        std::vector<std::string> candidates = scene::locate_candidates(state.spatial, category);
        for (const auto& id : state.spatial.carriers())
            if (std::find(candidates.begin(), candidates.end(), id) == candidates.end())
                candidates.push_back(id);
        for (const auto& id : candidates) {
            if (config_.use_temporal && role.visited.count(id)) continue;
            return id;
        }
        return std::nullopt;
    }

    // Memory-less fallback: seeded random-order sweep over the carrier list.
    if (!role.sweep_ready) {
        role.sweep_order = state.spatial.carriers();
        Rng sweep_rng(Rng::mix(config_.seed ^ Rng::mix(std::hash<std::string>{}(
                                   rt.ref.task + ":" + std::to_string(rt.ref.index) + robot))));
        sweep_rng.shuffle(role.sweep_order);
        role.sweep_ready = true;
        role.sweep_cursor = 0;
    }
    if (role.sweep_order.empty()) return std::nullopt;
    std::string next = role.sweep_order[role.sweep_cursor % role.sweep_order.size()];
    ++role.sweep_cursor;
    return next;
}

void Orchestrator::record_tool_event(SubtaskRuntime& rt, const std::string& robot,
                                     const plan::ToolGoal& goal, const sim::ToolOutcome& outcome,
                                     std::int64_t tick) {
    mem::ToolCallRecord record;
    record.tool = goal.tool;
    record.args = goal.args;
    record.status = outcome.status;
    record.feedback = outcome.feedback.empty() && outcome.status == mem::ToolStatus::Fail
                          ? outcome.fail_kind
                          : outcome.feedback;

    mem::Event event;
    event.task = rt.ref.task;
    event.pre_queue = pre_queue_for(rt.ref.task, rt.spec.depth);
    event.tools.push_back(record);
    if (!outcome.spatial_deltas.empty()) event.spatial = outcome.spatial_deltas.front();
    if (outcome.embodiment_delta) event.embodiment = outcome.embodiment_delta;
    kernel_.append(std::move(event));
    for (std::size_t i = 1; i < outcome.spatial_deltas.size(); ++i) {
        mem::Event extra;
        extra.task = rt.ref.task;
        extra.spatial = outcome.spatial_deltas[i];
        kernel_.append(std::move(extra));
    }

    --rt.budget;
    ++rt.steps;
    TaskRuntime& task_rt = tasks_.at(rt.ref.task);
    ++task_rt.steps;
    if (outcome.status == mem::ToolStatus::Fail) task_rt.last_fail_kind = outcome.fail_kind;

    emit(canon::json{{"kind", "tool"},
                     {"tick", tick},
                     {"task", rt.ref.task},
                     {"subtask", rt.ref.index},
                     {"robot", robot},
                     {"tool", goal.tool},
                     {"args", goal.args},
                     {"status", outcome.status == mem::ToolStatus::Ok ? "OK" : "FAIL"},
                     {"fail_kind", outcome.fail_kind},
                     {"feedback", outcome.feedback}});
}

bool Orchestrator::role_step(SubtaskRuntime& rt, std::size_t role_index, std::int64_t tick) {
    RoleRuntime& role = rt.roles[role_index];
    const std::string& robot = rt.spec.robots[role_index];
    const std::vector<plan::ToolGoal>& intent = rt.spec.roles[role_index];
    const mem::MemoryState& state = kernel_.state();

    if (role.done) return true;
    if (role.injected.empty() && role.cursor >= intent.size()) {
        role.done = true;
        return true;
    }

    if (rt.budget <= 0) {
        handle_failure(rt.ref, FailureCause::BudgetExhausted);
        return false;
    }

    bool from_injection = !role.injected.empty();
    plan::ToolGoal goal = from_injection ? role.injected.front() : intent[role.cursor];

    // Standing at a closed carrier the next perception/manipulation needs:
    // open it first (spatial memory knows the latch state).
    if (!from_injection && config_.use_spatial &&
        (goal.tool == "detect" || goal.tool == "pick" || goal.tool == "place")) {
        const std::string& loc = state.embodiment.count(robot)
                                     ? state.embodiment.at(robot).loc
                                     : std::string{};
        if (!loc.empty() && state.spatial.contains(loc)) {
            auto door = state.spatial.at(loc).state.find("door");
            if (door != state.spatial.at(loc).state.end() && door->second == "closed") {
                role.injected.push_back({"open", {{"target", loc}}});
                goal = role.injected.front();
                from_injection = true;
            }
        }
    }

    sim::ToolOutcome outcome = backend_.invoke(robot, goal.tool, goal.args);
    record_tool_event(rt, robot, goal, outcome, tick);

    TaskRuntime& task_rt = tasks_.at(rt.ref.task);
    if (task_rt.steps > config_.task_budget) {
        finish_task(rt.ref.task, false, FailureCause::BudgetExhausted);
        return false;
    }

    if (outcome.status == mem::ToolStatus::Ok) {
        const std::string& loc =
            state.embodiment.count(robot) ? state.embodiment.at(robot).loc : std::string{};
        if (goal.tool == "open") role.self_opened.insert(loc);
        if (goal.tool == "close") role.self_opened.erase(loc);
        if (from_injection)
            role.injected.pop_front();
        else {
            ++role.cursor;
            role.goal_retries = 0;
        }
        // leave doors the way we found them once the payload is down
        if (goal.tool == "place" && role.self_opened.count(loc))
            role.injected.push_back({"close", {{"target", loc}}});
    } else {
        const std::string& kind = outcome.fail_kind;
        if (kind == sim::kToolBroken || kind == sim::kCapabilityMissing) {
            ++role.goal_retries;
            if (config_.use_temporal && role.goal_retries > config_.retry_budget) {
                handle_failure(rt.ref, FailureCause::ToolFailure);
                return false;
            }
            // else retry the same goal next tick
        } else if (kind == sim::kNoObject || kind == sim::kNotAtCarrier) {
            const std::string& loc =
                state.embodiment.count(robot) ? state.embodiment.at(robot).loc : std::string{};
            if (config_.use_temporal && !loc.empty()) role.visited.insert(loc);
            // rewind pick/place misses to the perception step
            if (goal.tool != "detect" && !from_injection) {
                std::size_t rewind = role.cursor;
                for (std::size_t i = 0; i < intent.size() && i <= role.cursor; ++i)
                    if (intent[i].tool == "detect") rewind = i;
                role.cursor = rewind;
            }
            auto next = next_search_target(rt, role, rt.spec.category, robot);
            if (!next) {
                handle_failure(rt.ref, FailureCause::SearchExhausted);
                return false;
            }
            if (*next != loc) role.injected.push_back({"navigate", {{"target", *next}}});
        } else if (kind == sim::kClosed) {
            const std::string& loc =
                state.embodiment.count(robot) ? state.embodiment.at(robot).loc : std::string{};
            // Opening an instructed destination is local perception; opening
            // arbitrary containers mid-search takes spatial memory to justify.
            if (config_.use_spatial || goal.tool == "place") {
                role.injected.push_back({"open", {{"target", loc}}});
            } else {
                if (config_.use_temporal && !loc.empty()) role.visited.insert(loc);
                auto next = next_search_target(rt, role, rt.spec.category, robot);
                if (!next) {
                    handle_failure(rt.ref, FailureCause::SearchExhausted);
                    return false;
                }
                role.injected.push_back({"navigate", {{"target", *next}}});
            }
        } else if (kind == sim::kNotHolding) {
            std::size_t rewind = role.cursor;
            for (std::size_t i = 0; i < intent.size() && i <= role.cursor; ++i)
                if (intent[i].tool == "detect") rewind = i;
            role.cursor = rewind;
        } else if (kind == sim::kGripperFull) {
            ++role.goal_retries;
            if (config_.use_temporal && role.goal_retries > config_.retry_budget) {
                handle_failure(rt.ref, FailureCause::ToolFailure);
                return false;
            }
        } else if (kind == sim::kUnknownTarget) {
            handle_failure(rt.ref, FailureCause::ToolFailure);
            return false;
        } else {
            ++role.goal_retries;
            if (role.goal_retries > config_.retry_budget + 2) {
                handle_failure(rt.ref, FailureCause::ToolFailure);
                return false;
            }
        }
    }

    if (role.injected.empty() && role.cursor >= intent.size()) role.done = true;

    bool all_done = true;
    for (const auto& r : rt.roles)
        if (!r.done) all_done = false;
    if (all_done) {
        if (postcondition_met(rt)) {
            monitor_.complete(rt.ref);
            emit(canon::json{{"kind", "subtask_done"},
                             {"tick", tick},
                             {"task", rt.ref.task},
                             {"subtask", rt.ref.index},
                             {"steps", rt.steps}});
        } else if (config_.use_temporal && role.rearms < 3 && rt.budget > 0) {
            for (auto& r : rt.roles) {
                r.cursor = 0;
                r.injected.clear();
                r.done = false;
                ++r.rearms;
            }
        } else {
            FailureCause cause = task_rt.last_fail_kind == sim::kToolBroken
                                     ? FailureCause::ToolFailure
                                     : FailureCause::SearchExhausted;
            handle_failure(rt.ref, cause);
            return false;
        }
    }
    return true;
}

void Orchestrator::step(std::int64_t tick) {
    auto decisions = monitor_.step(tick);
    for (const auto& decision : decisions) {
        canon::json batch = canon::json::array();
        for (const auto& ref : decision.batch) {
            const SubtaskRuntime& rt = monitor_.runtime(ref);
            batch.push_back(canon::json{{"task", ref.task},
                                        {"subtask", ref.index},
                                        {"robots", rt.spec.robots},
                                        {"depth", rt.spec.depth}});
        }
        emit(canon::json{{"kind", "dispatch"},
                         {"tick", tick},
                         {"batch", batch},
                         {"rationale", decision.rationale}});
    }

    // Ready subtasks stuck on a swept-offline member are recovered here.
    for (const auto& ref : monitor_.in_state(SubtaskState::Ready)) {
        if (task_terminal(ref.task)) continue;
        if (!monitor_.valid(ref)) continue;
        const SubtaskRuntime& rt = monitor_.runtime(ref);
        if (rt.state != SubtaskState::Ready) continue;
        bool lost = false;
        for (const auto& robot : rt.spec.robots) {
            auto it = kernel_.state().embodiment.find(robot);
            if (it == kernel_.state().embodiment.end() ||
                it->second.availability == robots::Availability::Offline)
                lost = true;
        }
        if (lost) handle_failure(ref, FailureCause::RobotOffline);
    }

    // One tool call per robot per tick, in robot-id order.
    struct PendingStep {
        std::string robot;
        SubtaskRef ref;
        std::size_t role;
    };
    std::vector<PendingStep> pending;
    for (const auto& ref : monitor_.running()) {
        const SubtaskRuntime& rt = monitor_.runtime(ref);
        for (std::size_t k = 0; k < rt.spec.robots.size(); ++k)
            if (!rt.roles[k].done) pending.push_back({rt.spec.robots[k], ref, k});
    }
    std::sort(pending.begin(), pending.end(), [](const PendingStep& a, const PendingStep& b) {
        return std::tie(a.robot, a.ref, a.role) < std::tie(b.robot, b.ref, b.role);
    });

    for (const auto& step : pending) {
        if (task_terminal(step.ref.task)) continue;
        if (!monitor_.valid(step.ref)) continue;
        SubtaskRuntime& rt = monitor_.runtime(step.ref);
        if (rt.state != SubtaskState::Running) continue;
        if (step.role >= rt.roles.size()) continue;
        if (rt.roles[step.role].done) continue;
        if (rt.spec.robots[step.role] != step.robot) continue;

        auto it = kernel_.state().embodiment.find(step.robot);
        if (it == kernel_.state().embodiment.end() ||
            it->second.availability == robots::Availability::Offline) {
            handle_failure(step.ref, FailureCause::RobotOffline);
            continue;
        }
        if (!backend_.responsive(step.robot)) continue;  // disconnected: stalls silently

        role_step(rt, step.role, tick);
    }

    for (const auto& task : monitor_.active_tasks()) {
        if (!task_terminal(task) && monitor_.graph_done(task))
            finish_task(task, true, FailureCause::None);
    }
}

}  // namespace fleetmind::orch
