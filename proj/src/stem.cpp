#include "fleetmind/stem.hpp"

#include <algorithm>

#include "fleetmind/errors.hpp"

namespace fleetmind::mem {

namespace {

void apply_spatial(scene::SceneTree& tree, const SpatialDelta& delta) {
    switch (delta.kind) {
        case SpatialDeltaKind::Add: {
            if (!delta.object) throw Error(Err::MalformedDelta, "ADD without object payload");
            if (!tree.contains(delta.carrier) ||
                tree.at(delta.carrier).kind != scene::NodeKind::Carrier)
                throw Error(Err::DanglingReference, "unknown carrier " + delta.carrier);
            if (tree.carrier_of(delta.target))
                throw Error(Err::DuplicateObject, delta.target + " already in the tree");
            scene::SceneNode& carrier = tree.at(delta.carrier);
            carrier.graph = scene::add_object(std::move(carrier.graph), *delta.object, tree.params);
            break;
        }
        case SpatialDeltaKind::Remove: {
            if (!tree.contains(delta.carrier) ||
                tree.at(delta.carrier).kind != scene::NodeKind::Carrier)
                throw Error(Err::DanglingReference, "unknown carrier " + delta.carrier);
            scene::SceneNode& carrier = tree.at(delta.carrier);
            if (!carrier.graph.contains(delta.target))
                throw Error(Err::DanglingReference,
                            delta.target + " not on carrier " + delta.carrier);
            carrier.graph = scene::remove_object(std::move(carrier.graph), delta.target);
            break;
        }
        case SpatialDeltaKind::Move: {
            if (!delta.transform) throw Error(Err::MalformedDelta, "MOVE without transform");
            if (!tree.contains(delta.carrier) ||
                tree.at(delta.carrier).kind != scene::NodeKind::Carrier)
                throw Error(Err::DanglingReference, "unknown carrier " + delta.carrier);
            scene::SceneNode& carrier = tree.at(delta.carrier);
            if (!carrier.graph.contains(delta.target))
                throw Error(Err::DanglingReference,
                            delta.target + " not on carrier " + delta.carrier);
            carrier.graph = scene::move_object(std::move(carrier.graph), delta.target,
                                               *delta.transform, tree.params);
            break;
        }
        case SpatialDeltaKind::TreeEdit: {
            if (delta.state.empty()) throw Error(Err::MalformedDelta, "TREE_EDIT without patch");
            if (delta.carrier.empty()) {
                // state patch on a tree node (e.g. carrier door)
                if (!tree.contains(delta.target))
                    throw Error(Err::DanglingReference, "unknown node " + delta.target);
                for (const auto& [k, v] : delta.state) tree.at(delta.target).state[k] = v;
            } else {
                if (!tree.contains(delta.carrier) ||
                    tree.at(delta.carrier).kind != scene::NodeKind::Carrier)
                    throw Error(Err::DanglingReference, "unknown carrier " + delta.carrier);
                scene::SceneNode& carrier = tree.at(delta.carrier);
                auto it = carrier.graph.nodes.find(delta.target);
                if (it == carrier.graph.nodes.end())
                    throw Error(Err::DanglingReference,
                                delta.target + " not on carrier " + delta.carrier);
                for (const auto& [k, v] : delta.state) it->second.state[k] = v;
            }
            break;
        }
    }
}

}  // namespace

MemoryState apply_event(const MemoryState& state, const Event& event) {
    if (event.seq != state.version + 1)
        throw Error(Err::SequenceGap, "expected seq " + std::to_string(state.version + 1) +
                                          ", got " + std::to_string(event.seq));
    if (event.tau < state.last_tau)
        throw Error(Err::MalformedDelta, "tau regressed at seq " + std::to_string(event.seq));
    if (!event.has_payload())
        throw Error(Err::MalformedDelta, "empty event at seq " + std::to_string(event.seq));
    for (const auto& record : event.tools)
        if (record.status == ToolStatus::Fail && record.feedback.empty())
            throw Error(Err::MalformedDelta, "FAIL tool record without feedback");

    MemoryState next = state;
    if (event.spatial) apply_spatial(next.spatial, *event.spatial);
    if (event.embodiment)
        robots::apply_delta(next.embodiment, next.spatial, *event.embodiment, event.tau);
    next.temporal.push_back(std::make_shared<const Event>(event));
    next.version = event.seq;
    next.last_tau = event.tau;
    return next;
}

MemoryState reduce(MemoryState initial, const std::vector<Event>& events) {
    MemoryState state = std::move(initial);
    for (const auto& event : events) {
        try {
            state = apply_event(state, event);
        } catch (const Error& e) {
            throw Error(e.code(),
                        std::string(e.what()) + " (while folding seq " +
                            std::to_string(event.seq) + ")");
        }
    }
    return state;
}

std::string snapshot(const MemoryState& state) {
    canon::json temporal = canon::json::array();
    for (const auto& record : state.temporal) temporal.push_back(*record);
    canon::json roster = canon::json::object();
    for (const auto& [id, prof] : state.embodiment) roster[id] = prof;
    canon::json doc{{"format_version", 1},
                    {"version", state.version},
                    {"last_tau", state.last_tau},
                    {"spatial", state.spatial},
                    {"temporal", temporal},
                    {"embodiment", roster}};
    return canon::dump(doc);
}

MemoryState restore(const std::string& bytes) {
    canon::json doc = canon::parse(bytes);
    try {
        if (doc.value("format_version", 0) != 1)
            throw Error(Err::CorruptSnapshot, "unsupported format_version");
        MemoryState state;
        state.version = doc.at("version").get<std::int64_t>();
        state.last_tau = doc.value("last_tau", std::int64_t{0});
        state.spatial = doc.at("spatial").get<scene::SceneTree>();
        for (const auto& item : doc.at("temporal"))
            state.temporal.push_back(std::make_shared<const Event>(item.get<Event>()));
        for (auto it = doc.at("embodiment").begin(); it != doc.at("embodiment").end(); ++it)
            state.embodiment.emplace(it.key(), it.value().get<robots::RobotProfile>());
        return state;
    } catch (const canon::json::exception& e) {
        throw Error(Err::CorruptSnapshot, e.what());
    }
}

MemoryDigest build_digest(const MemoryState& state, const DigestScope& scope) {
    MemoryDigest digest;

    // Spatial summary: scope regions plus any carrier relevant to the scoped
    // categories (current holders and declared storage).
    std::set<std::string> carriers;
    for (const auto& region : scope.regions) {
        if (!state.spatial.contains(region)) continue;
        for (const auto& child : state.spatial.at(region).children) carriers.insert(child);
    }
    for (const auto& category : scope.categories)
        for (const auto& id : scene::locate_candidates(state.spatial, category))
            carriers.insert(id);

    std::map<std::string, canon::json> by_region;
    for (const auto& id : carriers) {
        if (!state.spatial.contains(id)) continue;
        const scene::SceneNode& node = state.spatial.at(id);
        canon::json holds = canon::json::array();
        for (const auto& [oid, obj] : node.graph.nodes)
            holds.push_back(canon::json{{"id", oid}, {"category", obj.category}});
        canon::json entry{{"id", id},
                          {"region", node.parent},
                          {"state", node.state},
                          {"affordances", node.affordances},
                          {"holds", holds}};
        if (!by_region.count(node.parent))
            by_region[node.parent] = canon::json{{"region", node.parent},
                                                 {"carriers", canon::json::array()}};
        by_region[node.parent]["carriers"].push_back(entry);
    }
    for (const auto& [region, entry] : by_region) digest.spatial_summary.push_back(entry);

    // Temporal: most recent records for the task, feedback lines first-class.
    std::vector<std::string> lines;
    for (auto it = state.temporal.rbegin(); it != state.temporal.rend(); ++it) {
        const Event& event = **it;
        if (!scope.task.empty() && event.task != scope.task) continue;
        for (const auto& record : event.tools) {
            std::string line = "tau " + std::to_string(event.tau) + ": " + record.tool +
                               (record.status == ToolStatus::Ok ? " OK" : " FAIL");
            if (!record.feedback.empty()) line += ": " + record.feedback;
            lines.push_back(std::move(line));
        }
        if (lines.size() >= scope.recent_limit) break;
    }
    std::reverse(lines.begin(), lines.end());
    digest.feedback = std::move(lines);

    // Roster: always full.
    for (const auto& [id, prof] : state.embodiment) {
        digest.roster.push_back(
            canon::json{{"id", id},
                        {"loc", prof.loc},
                        {"capabilities", std::vector<std::string>(prof.capabilities.begin(),
                                                                  prof.capabilities.end())},
                        {"availability", robots::to_string(prof.availability)},
                        {"battery", canon::quantize(prof.resources.battery)}});
    }
    return digest;
}

const Event& Kernel::append(Event draft) {
    draft.seq = state_.version + 1;
    draft.tau = tick_;
    state_ = apply_event(state_, draft);
    const Event& applied = *state_.temporal.back();
    if (sink_) *sink_ << event_line(applied) << '\n';
    return applied;
}

void Kernel::attach_log_file(const std::string& path) {
    sink_ = std::make_unique<std::ofstream>(path, std::ios::trunc);
    if (!*sink_) {
        sink_.reset();
        throw Error(Err::CorruptSnapshot, "cannot open log sink " + path);
    }
}

}  // namespace fleetmind::mem
