#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fleetmind/canonical.hpp"
#include "fleetmind/scene.hpp"

namespace fleetmind::robots {

enum class Availability { Idle, Busy, Offline };

const char* to_string(Availability a);
Availability availability_from_string(const std::string& name);

struct Resources {
    double battery = 100.0;
    double cpu = 0.0;
    double net = 100.0;
};

struct RobotProfile {
    std::string id;
    std::string loc;  // region or carrier node
    std::set<std::string> capabilities;
    Resources resources;
    std::map<std::string, std::string> sensors;  // opaque snapshot handles
    Availability availability = Availability::Idle;
    std::int64_t last_heartbeat = 0;
};

struct HeartbeatStatus {
    std::string robot;
    std::int64_t tick = 0;
    Resources resources;
    std::map<std::string, std::string> sensors;
    Availability claim = Availability::Idle;  // Idle or Busy
};

/// Why a delta was produced; controls heartbeat bookkeeping on apply.
enum class DeltaKind { Register, Heartbeat, Sweep, Localize, Hotplug, Availability };

const char* to_string(DeltaKind k);
DeltaKind delta_kind_from_string(const std::string& name);

struct EmbodimentDelta {
    std::string robot;
    DeltaKind kind = DeltaKind::Availability;
    std::set<std::string> changed;  // subset of the five profile fields
    canon::json payload;            // keys equal `changed`
};

using EmbodimentRegistry = std::map<std::string, RobotProfile>;

constexpr std::int64_t kDefaultHeartbeatPeriod = 5;
constexpr std::int64_t kDefaultOfflineThreshold = 3 * kDefaultHeartbeatPeriod;

// Delta builders validate against the current registry/tree and return the
// delta to be routed through the event log; they never mutate state.

EmbodimentDelta make_registration(const EmbodimentRegistry& reg, const scene::SceneTree& tree,
                                  const RobotProfile& profile);

EmbodimentDelta make_heartbeat(const EmbodimentRegistry& reg, const HeartbeatStatus& status);

/// One delta per robot crossing the staleness threshold; idempotent.
std::vector<EmbodimentDelta> sweep_offline(const EmbodimentRegistry& reg, std::int64_t now,
                                           std::int64_t offline_threshold);

/// Nearest carrier to `position`; ties by parent region id, then carrier id.
std::pair<std::string, EmbodimentDelta> snap_localization(const EmbodimentRegistry& reg,
                                                          const scene::SceneTree& tree,
                                                          const std::string& robot, Vec2 position);

/// Idle robots holding `tool`, sorted by tree hops from `near`, then map
/// distance, then id. `include_busy` extends the candidate pool for
/// allocation when every idle robot is occupied.
std::vector<std::string> find_capable(const EmbodimentRegistry& reg, const scene::SceneTree& tree,
                                      const std::string& tool, const std::string& near,
                                      bool include_busy = false);

/// nullopt when attach is already satisfied (idempotent no-op).
std::optional<EmbodimentDelta> make_hotplug(const EmbodimentRegistry& reg,
                                            const std::string& robot, const std::string& tool,
                                            bool attach);

EmbodimentDelta make_availability(const std::string& robot, Availability value);

/// Applies a delta built by the functions above. Registration creates the
/// profile; everything else requires the robot to exist.
void apply_delta(EmbodimentRegistry& reg, const scene::SceneTree& tree,
                 const EmbodimentDelta& delta, std::int64_t tau);

void to_json(canon::json& j, const Resources& r);
void from_json(const canon::json& j, Resources& r);
void to_json(canon::json& j, const RobotProfile& p);
void from_json(const canon::json& j, RobotProfile& p);
void to_json(canon::json& j, const EmbodimentDelta& d);
void from_json(const canon::json& j, EmbodimentDelta& d);

}  // namespace fleetmind::robots
