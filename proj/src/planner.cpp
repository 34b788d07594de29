#include "fleetmind/planner.hpp"

#include <algorithm>

#include "httplib.h"

#include "fleetmind/errors.hpp"

namespace fleetmind::plan {

const char* to_string(TaskTemplate t) {
    switch (t) {
        case TaskTemplate::Fetch: return "fetch";
        case TaskTemplate::Deliver: return "deliver";
        case TaskTemplate::Gather: return "gather";
        case TaskTemplate::PrepareServe: return "prepare_serve";
        case TaskTemplate::Package: return "package";
    }
    return "?";
}

TaskTemplate template_from_string(const std::string& name) {
    if (name == "fetch") return TaskTemplate::Fetch;
    if (name == "deliver") return TaskTemplate::Deliver;
    if (name == "gather") return TaskTemplate::Gather;
    if (name == "prepare_serve") return TaskTemplate::PrepareServe;
    if (name == "package") return TaskTemplate::Package;
    throw Error(Err::UnknownTemplate, name);
}

int WorkflowGraph::max_depth() const {
    int depth = 0;
    for (const auto& s : subtasks) depth = std::max(depth, s.depth);
    return depth;
}

namespace {

struct RosterEntry {
    std::string id;
    std::string loc;
    std::set<std::string> capabilities;
    robots::Availability availability = robots::Availability::Idle;
};

std::vector<RosterEntry> parse_roster(const canon::json& roster) {
    std::vector<RosterEntry> out;
    for (const auto& item : roster) {
        RosterEntry entry;
        entry.id = item.at("id").get<std::string>();
        entry.loc = item.value("loc", std::string{});
        auto caps = item.value("capabilities", std::vector<std::string>{});
        entry.capabilities = std::set<std::string>(caps.begin(), caps.end());
        entry.availability =
            robots::availability_from_string(item.value("availability", std::string{"IDLE"}));
        out.push_back(std::move(entry));
    }
    return out;
}

/// Believed location of a category, from the scoped spatial summary:
/// current holder first, declared storage second.
std::string believed_location(const canon::json& spatial_summary, const std::string& category) {
    for (const auto& region : spatial_summary) {
        for (const auto& carrier : region.value("carriers", canon::json::array())) {
            for (const auto& held : carrier.value("holds", canon::json::array())) {
                if (held.value("category", std::string{}) == category)
                    return carrier.at("id").get<std::string>();
            }
        }
    }
    return {};
}

class Assigner {
public:
    Assigner(const PlannerContext& ctx, const RuleSet& rules)
        : roster_(parse_roster(ctx.digest.roster)), state_(ctx.state), rules_(rules) {}

    /// Nearest capable robot for a tool set, spreading load across the plan.
    std::string pick(const std::set<std::string>& tools, const std::string& near,
                     std::vector<std::string>* trace) {
        struct Candidate {
            int load;
            int busy;
            int hops;
            double dist;
            std::string id;
        };
        std::vector<Candidate> candidates;
        for (const auto& entry : roster_) {
            if (entry.availability == robots::Availability::Offline) continue;
            bool capable = true;
            for (const auto& tool : tools)
                if (!entry.capabilities.count(tool)) capable = false;
            if (!capable) continue;
            int busy = entry.availability == robots::Availability::Busy ? 1 : 0;
            if (busy && !rules_.allow_busy_candidates) continue;
            int hops = 0;
            double dist = 0.0;
            if (state_ && !near.empty() && state_->spatial.contains(near) &&
                state_->spatial.contains(entry.loc)) {
                hops = scene::tree_hop_distance(state_->spatial, near, entry.loc);
                dist = (state_->spatial.at(near).position - state_->spatial.at(entry.loc).position)
                           .norm();
            }
            candidates.push_back({load_[entry.id], busy, hops, dist, entry.id});
        }
        if (candidates.empty()) {
            throw Error(Err::NoCapableRobot, "no candidate for {" + join(tools) + "}");
        }
        std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
            return std::tie(a.load, a.busy, a.hops, a.dist, a.id) <
                   std::tie(b.load, b.busy, b.hops, b.dist, b.id);
        });
        const Candidate& chosen = candidates.front();
        ++load_[chosen.id];
        if (trace)
            trace->push_back("assign " + chosen.id + " for {" + join(tools) + "} near " +
                             (near.empty() ? "-" : near));
        return chosen.id;
    }

private:
    static std::string join(const std::set<std::string>& items) {
        std::string out;
        for (const auto& item : items) {
            if (!out.empty()) out += ",";
            out += item;
        }
        return out;
    }

    std::vector<RosterEntry> roster_;
    const mem::MemoryState* state_;
    RuleSet rules_;
    std::map<std::string, int> load_;
};

std::vector<ToolGoal> fetch_intent(const std::string& item, const std::string& hint,
                                   const std::string& dest) {
    std::vector<ToolGoal> intent;
    if (!hint.empty()) intent.push_back({"navigate", {{"target", hint}}});
    intent.push_back({"detect", {{"category", item}}});
    intent.push_back({"pick", {{"category", item}}});
    intent.push_back({"navigate", {{"target", dest}}});
    intent.push_back({"place", {{"target", dest}}});
    return intent;
}

std::set<std::string> role_tools(const std::vector<std::vector<ToolGoal>>& roles) {
    std::set<std::string> tools;
    for (const auto& role : roles)
        for (const auto& goal : role) tools.insert(goal.tool);
    return tools;
}

}  // namespace

PlanResult decompose(const PlannerContext& ctx, const RuleSet& rules) {
    const GlobalTask& task = ctx.task;
    PlanResult plan;
    plan.graph.task = task.id;
    plan.trace.push_back("template " + std::string(to_string(task.tmpl)) + ": " +
                         task.instruction);

    Assigner assigner(ctx, rules);
    auto hint_for = [&](const std::string& item) {
        std::string hint = believed_location(ctx.digest.spatial_summary, item);
        plan.trace.push_back(hint.empty() ? ("item " + item + ": no believed location")
                                          : ("item " + item + ": believed at " + hint));
        return hint;
    };

    switch (task.tmpl) {
        case TaskTemplate::Fetch:
        case TaskTemplate::Gather: {
            if (task.items.empty() || task.dest.empty())
                throw Error(Err::UnknownTemplate, "fetch/gather needs items and dest");
            for (const auto& item : task.items) {
                Subtask sub;
                std::string hint = hint_for(item);
                sub.description = "fetch " + item + " to " + task.dest;
                sub.roles = {fetch_intent(item, hint, task.dest)};
                sub.depth = 1;
                sub.category = item;
                sub.dest = task.dest;
                sub.hint = hint;
                sub.robots = {assigner.pick(role_tools(sub.roles), hint.empty() ? task.dest : hint,
                                            &plan.trace)};
                plan.graph.subtasks.push_back(std::move(sub));
            }
            break;
        }
        case TaskTemplate::Deliver: {
            if (task.items.empty() || task.dest.empty())
                throw Error(Err::UnknownTemplate, "deliver needs an item and dest");
            const std::string& item = task.items.front();
            std::string hint = task.staging.empty() ? hint_for(item) : task.staging;

            Subtask retrieve;
            retrieve.description = "retrieve " + item;
            std::vector<ToolGoal> intent;
            if (!hint.empty()) intent.push_back({"navigate", {{"target", hint}}});
            intent.push_back({"detect", {{"category", item}}});
            intent.push_back({"pick", {{"category", item}}});
            retrieve.roles = {intent};
            retrieve.depth = 1;
            retrieve.category = item;
            retrieve.hint = hint;
            std::string robot = assigner.pick({"navigate", "detect", "pick", "place"},
                                              hint.empty() ? task.dest : hint, &plan.trace);
            retrieve.robots = {robot};
            plan.graph.subtasks.push_back(std::move(retrieve));

            Subtask deliver;
            deliver.description = "deliver " + item + " to " + task.dest;
            deliver.roles = {{{"navigate", {{"target", task.dest}}},
                              {"place", {{"target", task.dest}}}}};
            deliver.depth = 2;
            deliver.category = item;
            deliver.dest = task.dest;
            deliver.robots = {robot};  // same arm keeps the payload
            plan.graph.subtasks.push_back(std::move(deliver));
            break;
        }
        case TaskTemplate::PrepareServe: {
            if (task.items.empty() || task.dest.empty() || task.staging.empty())
                throw Error(Err::UnknownTemplate, "prepare_serve needs items, staging, dest");
            for (const auto& item : task.items) {
                Subtask prep;
                std::string hint = hint_for(item);
                prep.description = "prepare " + item + " at " + task.staging;
                std::vector<ToolGoal> intent = fetch_intent(item, hint, task.staging);
                intent.push_back({"prepare", {{"category", item}}});
                prep.roles = {intent};
                prep.depth = 1;
                prep.category = item;
                prep.dest = task.staging;
                prep.hint = hint;
                prep.robots = {assigner.pick(role_tools(prep.roles),
                                             hint.empty() ? task.staging : hint, &plan.trace)};
                plan.graph.subtasks.push_back(std::move(prep));
            }
            for (const auto& item : task.items) {
                Subtask serve;
                serve.description = "serve " + item + " to " + task.dest;
                serve.roles = {fetch_intent(item, task.staging, task.dest)};
                serve.depth = 2;
                serve.category = item;
                serve.dest = task.dest;
                serve.hint = task.staging;
                serve.robots = {assigner.pick(role_tools(serve.roles), task.staging, &plan.trace)};
                plan.graph.subtasks.push_back(std::move(serve));
            }
            break;
        }
        case TaskTemplate::Package: {
            if (task.items.empty() || task.container.empty())
                throw Error(Err::UnknownTemplate, "package needs an item and container");
            const std::string& item = task.items.front();
            std::string hint = hint_for(item);

            Subtask open_sub;
            open_sub.description = "open " + task.container;
            open_sub.roles = {{{"navigate", {{"target", task.container}}},
                               {"open", {{"target", task.container}}}}};
            open_sub.depth = 1;
            open_sub.dest = task.container;
            std::string opener = assigner.pick({"navigate", "open", "close", "hold"},
                                               task.container, &plan.trace);
            open_sub.robots = {opener};
            plan.graph.subtasks.push_back(std::move(open_sub));

            Subtask stage;
            stage.description = "stage " + item + " at " + task.container;
            std::vector<ToolGoal> intent;
            if (!hint.empty()) intent.push_back({"navigate", {{"target", hint}}});
            intent.push_back({"detect", {{"category", item}}});
            intent.push_back({"pick", {{"category", item}}});
            intent.push_back({"navigate", {{"target", task.container}}});
            stage.roles = {intent};
            stage.depth = 1;
            stage.category = item;
            stage.hint = hint;
            std::string stager = assigner.pick({"navigate", "detect", "pick", "place"},
                                               hint.empty() ? task.container : hint, &plan.trace);
            stage.robots = {stager};
            plan.graph.subtasks.push_back(std::move(stage));

            Subtask pack;
            pack.description = "pack " + item + " into " + task.container;
            pack.roles = {{{"hold", {{"target", task.container}}},
                           {"close", {{"target", task.container}}}},
                          {{"place", {{"target", task.container}}}}};
            pack.depth = 2;
            pack.category = item;
            pack.dest = task.container;
            pack.robots = {opener, stager};  // collaboration subtask
            plan.graph.subtasks.push_back(std::move(pack));
            break;
        }
    }

    plan.trace.push_back("graph: " + std::to_string(plan.graph.subtasks.size()) + " subtasks, " +
                         std::to_string(plan.graph.max_depth()) + " layers");
    return plan;
}

std::vector<Violation> validate_graph(const WorkflowGraph& graph,
                                      const robots::EmbodimentRegistry& reg,
                                      const scene::SceneTree& tree) {
    std::vector<Violation> violations;
    if (graph.subtasks.empty()) {
        violations.push_back({"EMPTY_GRAPH", "graph has no subtasks", -1});
        return violations;
    }

    std::set<int> depths;
    for (const auto& s : graph.subtasks) depths.insert(s.depth);
    int expected = 1;
    for (int d : depths) {
        if (d != expected) {
            violations.push_back({"NONCONTIGUOUS_DEPTHS", "depth layers are not 1..D", -1});
            break;
        }
        ++expected;
    }

    std::set<std::string> known_categories;
    for (const auto& [id, node] : tree.nodes)
        for (const auto& [oid, obj] : node.graph.nodes) known_categories.insert(obj.category);
    for (const auto& [cat, carriers] : tree.storage_priors) known_categories.insert(cat);

    for (std::size_t i = 0; i < graph.subtasks.size(); ++i) {
        const Subtask& s = graph.subtasks[i];
        int index = static_cast<int>(i);
        if (s.robots.empty())
            violations.push_back({"EMPTY_ROBOTS", s.description + " binds no robot", index});
        if (s.roles.size() != s.robots.size())
            violations.push_back(
                {"ROLE_MISMATCH", s.description + " role/robot count differs", index});

        for (std::size_t k = 0; k < s.robots.size(); ++k) {
            const std::string& robot = s.robots[k];
            auto it = reg.find(robot);
            if (it == reg.end()) {
                violations.push_back({"UNKNOWN_ROBOT", robot + " not registered", index});
                continue;
            }
            if (k < s.roles.size()) {
                for (const auto& goal : s.roles[k]) {
                    if (!it->second.capabilities.count(goal.tool))
                        violations.push_back(
                            {"CAPABILITY_GAP", robot + " lacks " + goal.tool, index});
                }
            }
        }

        auto check_location = [&](const std::string& loc) {
            if (!loc.empty() && !tree.contains(loc))
                violations.push_back(
                    {"HALLUCINATED_LOCATION", loc + " is not in spatial memory", index});
        };
        check_location(s.hint);
        check_location(s.dest);
        for (const auto& role : s.roles)
            for (const auto& goal : role) {
                auto arg = goal.args.find("target");
                if (goal.tool == "navigate" && arg != goal.args.end()) check_location(arg->second);
            }
        if (!s.category.empty() && !known_categories.count(s.category))
            violations.push_back(
                {"HALLUCINATED_CATEGORY", s.category + " unknown to memory and priors", index});
    }
    return violations;
}

canon::json request_to_json(const PlannerContext& ctx) {
    return canon::json{{"instruction", ctx.task.instruction},
                       {"template", to_string(ctx.task.tmpl)},
                       {"task", ctx.task.id},
                       {"items", ctx.task.items},
                       {"dest", ctx.task.dest},
                       {"spatial", ctx.digest.spatial_summary},
                       {"feedback", ctx.digest.feedback},
                       {"roster", ctx.digest.roster}};
}

namespace {

canon::json goal_to_json(const ToolGoal& g) {
    return canon::json{{"tool", g.tool}, {"args", g.args}};
}

ToolGoal goal_from_json(const canon::json& j) {
    ToolGoal g;
    g.tool = j.at("tool").get<std::string>();
    g.args = j.value("args", std::map<std::string, std::string>{});
    return g;
}

}  // namespace

canon::json plan_to_json(const PlanResult& plan) {
    canon::json subtasks = canon::json::array();
    for (const auto& s : plan.graph.subtasks) {
        canon::json roles = canon::json::array();
        for (const auto& role : s.roles) {
            canon::json goals = canon::json::array();
            for (const auto& goal : role) goals.push_back(goal_to_json(goal));
            roles.push_back(goals);
        }
        subtasks.push_back(canon::json{{"description", s.description},
                                       {"depth", s.depth},
                                       {"robots", s.robots},
                                       {"roles", roles},
                                       {"category", s.category},
                                       {"dest", s.dest},
                                       {"hint", s.hint}});
    }
    return canon::json{{"trace", plan.trace}, {"task", plan.graph.task}, {"subtasks", subtasks}};
}

PlanResult plan_from_json(const canon::json& j, const std::string& task_id) {
    PlanResult plan;
    plan.trace = j.value("trace", std::vector<std::string>{});
    plan.graph.task = j.value("task", task_id);
    for (const auto& item : j.value("subtasks", canon::json::array())) {
        Subtask s;
        s.description = item.value("description", std::string{});
        s.depth = item.value("depth", 1);
        s.robots = item.value("robots", std::vector<std::string>{});
        for (const auto& role : item.value("roles", canon::json::array())) {
            std::vector<ToolGoal> goals;
            for (const auto& goal : role) goals.push_back(goal_from_json(goal));
            s.roles.push_back(std::move(goals));
        }
        s.category = item.value("category", std::string{});
        s.dest = item.value("dest", std::string{});
        s.hint = item.value("hint", std::string{});
        plan.graph.subtasks.push_back(std::move(s));
    }
    return plan;
}

PlanResult remote_decompose(const PlannerContext& ctx, const RemoteOptions& options) {
    httplib::Client client(options.host, options.port);
    auto seconds = static_cast<time_t>(options.timeout_s);
    auto micros = static_cast<long>((options.timeout_s - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);

    std::string body = canon::dump(request_to_json(ctx));
    auto res = client.Post(options.path.c_str(), body, "application/json");
    if (!res) {
        auto err = res.error();
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
            err == httplib::Error::Write)
            throw Error(Err::Timeout, "remote planner timed out");
        throw Error(Err::TransportFailure, httplib::to_string(err));
    }
    if (res->status != 200)
        throw Error(Err::TransportFailure, "remote planner status " + std::to_string(res->status));

    PlanResult plan;
    try {
        plan = plan_from_json(canon::parse(res->body), ctx.task.id);
    } catch (const std::exception& e) {
        throw Error(Err::TransportFailure, std::string("unparseable response: ") + e.what());
    }

    if (!ctx.state) throw Error(Err::InvalidPlan, "remote validation needs a memory snapshot");
    auto violations = validate_graph(plan.graph, ctx.state->embodiment, ctx.state->spatial);
    if (!violations.empty()) {
        std::vector<std::string> details;
        for (const auto& v : violations) details.push_back(v.code + ": " + v.message);
        throw Error(Err::Hallucination, "remote plan rejected", details);
    }
    return plan;
}

void to_json(canon::json& j, const GlobalTask& t) {
    j = canon::json{{"id", t.id},
                    {"template", to_string(t.tmpl)},
                    {"instruction", t.instruction},
                    {"items", t.items},
                    {"dest", t.dest},
                    {"staging", t.staging},
                    {"container", t.container},
                    {"arrival", t.arrival},
                    {"sq", t.sq_index},
                    {"sq_len", t.sq_len}};
}

void from_json(const canon::json& j, GlobalTask& t) {
    t.id = j.at("id").get<std::string>();
    t.tmpl = template_from_string(j.at("template").get<std::string>());
    t.instruction = j.value("instruction", std::string{});
    t.items = j.value("items", std::vector<std::string>{});
    t.dest = j.value("dest", std::string{});
    t.staging = j.value("staging", std::string{});
    t.container = j.value("container", std::string{});
    t.arrival = j.value("arrival", std::int64_t{0});
    t.sq_index = j.value("sq", 1);
    t.sq_len = j.value("sq_len", 1);
}

}  // namespace fleetmind::plan
