#include "fleetmind/events.hpp"

#include <fstream>
#include <sstream>

#include "fleetmind/errors.hpp"

namespace fleetmind::mem {

const char* to_string(SpatialDeltaKind k) {
    switch (k) {
        case SpatialDeltaKind::Add: return "ADD";
        case SpatialDeltaKind::Remove: return "REMOVE";
        case SpatialDeltaKind::Move: return "MOVE";
        case SpatialDeltaKind::TreeEdit: return "TREE_EDIT";
    }
    return "?";
}

SpatialDeltaKind spatial_delta_kind_from_string(const std::string& name) {
    if (name == "ADD") return SpatialDeltaKind::Add;
    if (name == "REMOVE") return SpatialDeltaKind::Remove;
    if (name == "MOVE") return SpatialDeltaKind::Move;
    if (name == "TREE_EDIT") return SpatialDeltaKind::TreeEdit;
    throw Error(Err::MalformedDelta, "unknown spatial delta kind " + name);
}

SpatialDelta make_add(const std::string& carrier, scene::ObjectNode object) {
    SpatialDelta d;
    d.kind = SpatialDeltaKind::Add;
    d.carrier = carrier;
    d.target = object.id;
    object.pose = scene::quantize_transform(object.pose);
    object.half_extents = scene::quantize_vec3(object.half_extents);
    d.object = std::move(object);
    return d;
}

SpatialDelta make_remove(const std::string& carrier, const std::string& object_id) {
    SpatialDelta d;
    d.kind = SpatialDeltaKind::Remove;
    d.carrier = carrier;
    d.target = object_id;
    return d;
}

SpatialDelta make_move(const std::string& carrier, const std::string& object_id,
                       const RigidTransform& delta) {
    SpatialDelta d;
    d.kind = SpatialDeltaKind::Move;
    d.carrier = carrier;
    d.target = object_id;
    d.transform = scene::quantize_transform(delta);
    return d;
}

SpatialDelta make_state_edit(const std::string& carrier, const std::string& target,
                             std::map<std::string, std::string> patch) {
    SpatialDelta d;
    d.kind = SpatialDeltaKind::TreeEdit;
    d.carrier = carrier;
    d.target = target;
    d.state = std::move(patch);
    return d;
}

void to_json(canon::json& j, const ToolCallRecord& r) {
    j = canon::json{{"tool", r.tool},
                    {"args", r.args},
                    {"status", r.status == ToolStatus::Ok ? "OK" : "FAIL"},
                    {"feedback", r.feedback}};
}

void from_json(const canon::json& j, ToolCallRecord& r) {
    r.tool = j.at("tool").get<std::string>();
    r.args = j.value("args", std::map<std::string, std::string>{});
    std::string status = j.at("status").get<std::string>();
    if (status == "OK")
        r.status = ToolStatus::Ok;
    else if (status == "FAIL")
        r.status = ToolStatus::Fail;
    else
        throw Error(Err::MalformedDelta, "unknown tool status " + status);
    r.feedback = j.value("feedback", std::string{});
}

void to_json(canon::json& j, const SpatialDelta& d) {
    j = canon::json{{"variant", to_string(d.kind)}, {"target", d.target}, {"carrier", d.carrier}};
    if (d.object) j["object"] = *d.object;
    if (d.transform) j["transform"] = scene::transform_to_json(*d.transform);
    if (!d.state.empty()) j["state"] = d.state;
}

void from_json(const canon::json& j, SpatialDelta& d) {
    d = SpatialDelta{};
    d.kind = spatial_delta_kind_from_string(j.at("variant").get<std::string>());
    d.target = j.at("target").get<std::string>();
    d.carrier = j.value("carrier", std::string{});
    if (j.contains("object")) d.object = j.at("object").get<scene::ObjectNode>();
    if (j.contains("transform")) d.transform = scene::transform_from_json(j.at("transform"));
    d.state = j.value("state", std::map<std::string, std::string>{});
}

void to_json(canon::json& j, const Event& e) {
    j = canon::json{{"seq", e.seq},
                    {"tau", e.tau},
                    {"task", e.task},
                    {"pre", e.pre_queue},
                    {"tools", e.tools}};
    j["spatial"] = e.spatial ? canon::json(*e.spatial) : canon::json(nullptr);
    j["embodiment"] = e.embodiment ? canon::json(*e.embodiment) : canon::json(nullptr);
}

void from_json(const canon::json& j, Event& e) {
    e = Event{};
    e.seq = j.at("seq").get<std::int64_t>();
    e.tau = j.at("tau").get<std::int64_t>();
    e.task = j.value("task", std::string{});
    e.pre_queue = j.value("pre", std::vector<std::string>{});
    if (j.contains("tools"))
        e.tools = j.at("tools").get<std::vector<ToolCallRecord>>();
    if (j.contains("spatial") && !j.at("spatial").is_null())
        e.spatial = j.at("spatial").get<SpatialDelta>();
    if (j.contains("embodiment") && !j.at("embodiment").is_null())
        e.embodiment = j.at("embodiment").get<robots::EmbodimentDelta>();
}

std::string event_line(const Event& e) { return canon::dump(canon::json(e)); }

Event event_from_line(const std::string& line) {
    return canon::parse(line).get<Event>();
}

std::vector<Event> read_event_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Err::CorruptSnapshot, "cannot open event log " + path);
    std::vector<Event> events;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        events.push_back(event_from_line(line));
    }
    return events;
}

void write_event_log(const std::string& path, const std::vector<Event>& events) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Err::CorruptSnapshot, "cannot write event log " + path);
    for (const auto& e : events) out << event_line(e) << '\n';
}

}  // namespace fleetmind::mem
