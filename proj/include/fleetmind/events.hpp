#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fleetmind/canonical.hpp"
#include "fleetmind/robots.hpp"
#include "fleetmind/scene.hpp"

namespace fleetmind::mem {

enum class ToolStatus { Ok, Fail };

struct ToolCallRecord {
    std::string tool;
    std::map<std::string, std::string> args;
    ToolStatus status = ToolStatus::Ok;
    std::string feedback;  // required when status == Fail
};

enum class SpatialDeltaKind { Add, Remove, Move, TreeEdit };

const char* to_string(SpatialDeltaKind k);
SpatialDeltaKind spatial_delta_kind_from_string(const std::string& name);

/// One spatial edit. Add carries the full object; Move an incremental
/// transform; TreeEdit a state patch on a tree node or graph object.
struct SpatialDelta {
    SpatialDeltaKind kind = SpatialDeltaKind::Add;
    std::string target;                         // object or tree node id
    std::string carrier;                        // owning carrier (empty for tree nodes)
    std::optional<scene::ObjectNode> object;    // Add
    std::optional<RigidTransform> transform;    // Move
    std::map<std::string, std::string> state;   // TreeEdit patch
};

SpatialDelta make_add(const std::string& carrier, scene::ObjectNode object);
SpatialDelta make_remove(const std::string& carrier, const std::string& object_id);
SpatialDelta make_move(const std::string& carrier, const std::string& object_id,
                       const RigidTransform& delta);
SpatialDelta make_state_edit(const std::string& carrier, const std::string& target,
                             std::map<std::string, std::string> patch);

struct Event {
    std::int64_t seq = 0;
    std::int64_t tau = 0;
    std::optional<SpatialDelta> spatial;
    std::optional<robots::EmbodimentDelta> embodiment;
    std::string task;                      // global task id, may be empty
    std::vector<std::string> pre_queue;    // staged predecessor subtask ids
    std::vector<ToolCallRecord> tools;

    bool has_payload() const { return spatial || embodiment || !tools.empty(); }
};

void to_json(canon::json& j, const ToolCallRecord& r);
void from_json(const canon::json& j, ToolCallRecord& r);
void to_json(canon::json& j, const SpatialDelta& d);
void from_json(const canon::json& j, SpatialDelta& d);
void to_json(canon::json& j, const Event& e);
void from_json(const canon::json& j, Event& e);

/// One canonical-text line per event.
std::string event_line(const Event& e);
Event event_from_line(const std::string& line);
std::vector<Event> read_event_log(const std::string& path);
void write_event_log(const std::string& path, const std::vector<Event>& events);

}  // namespace fleetmind::mem
