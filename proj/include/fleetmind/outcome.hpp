#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fleetmind/events.hpp"

namespace fleetmind::sim {

/// Machine-readable failure flavors carried in ToolOutcome feedback.
inline constexpr const char* kNoObject = "NO_OBJECT";
inline constexpr const char* kClosed = "CLOSED";
inline constexpr const char* kToolBroken = "TOOL_BROKEN";
inline constexpr const char* kNotAtCarrier = "NOT_AT_CARRIER";
inline constexpr const char* kGripperFull = "GRIPPER_FULL";
inline constexpr const char* kNotHolding = "NOT_HOLDING";
inline constexpr const char* kCapabilityMissing = "CAPABILITY_MISSING";
inline constexpr const char* kUnknownTarget = "UNKNOWN_TARGET";

struct ToolOutcome {
    mem::ToolStatus status = mem::ToolStatus::Ok;
    std::string feedback;
    std::string fail_kind;  // one of the codes above when status == Fail
    std::vector<mem::SpatialDelta> spatial_deltas;
    std::optional<robots::EmbodimentDelta> embodiment_delta;
    std::int64_t duration = 1;  // ticks
};

/// World surface the agents drive. The simulator implements it; tests may
/// substitute scripted backends.
class ToolBackend {
public:
    virtual ~ToolBackend() = default;
    virtual ToolOutcome invoke(const std::string& robot, const std::string& tool,
                               const std::map<std::string, std::string>& args) = 0;
    /// False while the robot is disconnected (it silently skips its turn).
    virtual bool responsive(const std::string& robot) const { return true; }
};

enum class FaultMode { None, E1Offline, E2ToolFail, E3Hallucination };

const char* to_string(FaultMode m);
FaultMode fault_mode_from_string(const std::string& name);

struct FaultPlan {
    FaultMode mode = FaultMode::None;
    std::int64_t trigger_tick = 0;
    std::string robot;       // E1/E2 target
    std::string tool;        // E2 target
    bool persistent = true;
    std::int64_t duration = 0;  // ticks, transient faults
    int rounds = 1;             // E3: corrupted plans before self-correcting
};

void to_json(canon::json& j, const FaultPlan& p);
void from_json(const canon::json& j, FaultPlan& p);

}  // namespace fleetmind::sim
