#pragma once

#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fleetmind/events.hpp"
#include "fleetmind/robots.hpp"
#include "fleetmind/scene.hpp"

namespace fleetmind::mem {

/// Shared memory triple. A value type: apply_event never mutates its input,
/// so snapshots can be handed to concurrent readers freely. The temporal
/// queue holds immutable records behind shared_ptr, which keeps per-event
/// state copies cheap.
struct MemoryState {
    scene::SceneTree spatial;
    std::vector<std::shared_ptr<const Event>> temporal;
    robots::EmbodimentRegistry embodiment;
    std::int64_t version = 0;
    std::int64_t last_tau = 0;
};

/// Single application of the update operator. Pure transition; throws
/// SequenceGap / DanglingReference / MalformedDelta.
MemoryState apply_event(const MemoryState& state, const Event& event);

/// Left fold of apply_event over a seq-contiguous stream. Errors carry the
/// offending seq in the message.
MemoryState reduce(MemoryState initial, const std::vector<Event>& events);

/// Canonical snapshot bytes: equal states produce equal bytes.
std::string snapshot(const MemoryState& state);
MemoryState restore(const std::string& bytes);

struct DigestScope {
    std::string task;
    std::set<std::string> regions;
    std::set<std::string> categories;
    std::size_t recent_limit = 20;
};

/// Planner-facing view: scoped spatial summary, recent task feedback, and
/// the full robot roster.
struct MemoryDigest {
    canon::json spatial_summary = canon::json::array();
    std::vector<std::string> feedback;
    canon::json roster = canon::json::array();
};

MemoryDigest build_digest(const MemoryState& state, const DigestScope& scope);

/// Single-writer front end: assigns seq/tau, applies, and optionally
/// persists one canonical line per event.
class Kernel {
public:
    Kernel() = default;
    explicit Kernel(MemoryState initial) : state_(std::move(initial)) {}

    const MemoryState& state() const { return state_; }
    std::int64_t tick() const { return tick_; }
    void set_tick(std::int64_t t) { tick_ = t; }

    /// Fills in seq/tau and applies. Returns the applied event.
    const Event& append(Event draft);

    void attach_log_file(const std::string& path);

private:
    MemoryState state_;
    std::int64_t tick_ = 0;
    std::unique_ptr<std::ofstream> sink_;
};

}  // namespace fleetmind::mem
