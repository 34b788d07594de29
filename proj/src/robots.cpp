#include "fleetmind/robots.hpp"

#include <algorithm>
#include <cmath>

#include "fleetmind/errors.hpp"

namespace fleetmind::robots {

const char* to_string(Availability a) {
    switch (a) {
        case Availability::Idle: return "IDLE";
        case Availability::Busy: return "BUSY";
        case Availability::Offline: return "OFFLINE";
    }
    return "?";
}

Availability availability_from_string(const std::string& name) {
    if (name == "IDLE") return Availability::Idle;
    if (name == "BUSY") return Availability::Busy;
    if (name == "OFFLINE") return Availability::Offline;
    throw Error(Err::CorruptSnapshot, "unknown availability " + name);
}

const char* to_string(DeltaKind k) {
    switch (k) {
        case DeltaKind::Register: return "REGISTER";
        case DeltaKind::Heartbeat: return "HEARTBEAT";
        case DeltaKind::Sweep: return "SWEEP";
        case DeltaKind::Localize: return "LOCALIZE";
        case DeltaKind::Hotplug: return "HOTPLUG";
        case DeltaKind::Availability: return "AVAILABILITY";
    }
    return "?";
}

DeltaKind delta_kind_from_string(const std::string& name) {
    if (name == "REGISTER") return DeltaKind::Register;
    if (name == "HEARTBEAT") return DeltaKind::Heartbeat;
    if (name == "SWEEP") return DeltaKind::Sweep;
    if (name == "LOCALIZE") return DeltaKind::Localize;
    if (name == "HOTPLUG") return DeltaKind::Hotplug;
    if (name == "AVAILABILITY") return DeltaKind::Availability;
    throw Error(Err::CorruptSnapshot, "unknown delta kind " + name);
}

namespace {

void require_known(const EmbodimentRegistry& reg, const std::string& robot) {
    if (!reg.count(robot)) throw Error(Err::UnknownRobot, robot);
}

canon::json resources_json(const Resources& r) {
    return canon::json{{"battery", canon::quantize(r.battery)},
                       {"cpu", canon::quantize(r.cpu)},
                       {"net", canon::quantize(r.net)}};
}

Resources resources_from(const canon::json& j) {
    Resources r;
    r.battery = j.value("battery", 100.0);
    r.cpu = j.value("cpu", 0.0);
    r.net = j.value("net", 100.0);
    if (r.battery < 0 || r.battery > 100 || r.cpu < 0 || r.cpu > 100 || r.net < 0 || r.net > 100)
        throw Error(Err::MalformedDelta, "resource out of [0,100]");
    return r;
}

}  // namespace

EmbodimentDelta make_registration(const EmbodimentRegistry& reg, const scene::SceneTree& tree,
                                  const RobotProfile& profile) {
    if (reg.count(profile.id)) throw Error(Err::DuplicateRobot, profile.id);
    if (!tree.contains(profile.loc)) throw Error(Err::UnknownLocation, profile.loc);
    scene::NodeKind kind = tree.at(profile.loc).kind;
    if (kind == scene::NodeKind::Root)
        throw Error(Err::UnknownLocation, "robot location must be region or carrier");

    EmbodimentDelta delta;
    delta.robot = profile.id;
    delta.kind = DeltaKind::Register;
    delta.changed = {"availability", "capabilities", "location", "resources", "sensors"};
    delta.payload = canon::json{
        {"location", profile.loc},
        {"capabilities", std::vector<std::string>(profile.capabilities.begin(),
                                                  profile.capabilities.end())},
        {"resources", resources_json(profile.resources)},
        {"sensors", profile.sensors},
        {"availability", "IDLE"}};
    return delta;
}

EmbodimentDelta make_heartbeat(const EmbodimentRegistry& reg, const HeartbeatStatus& status) {
    require_known(reg, status.robot);
    const RobotProfile& prof = reg.at(status.robot);
    if (status.tick < prof.last_heartbeat)
        throw Error(Err::StaleTick, status.robot + " tick " + std::to_string(status.tick));
    if (status.claim == Availability::Offline)
        throw Error(Err::MalformedDelta, "heartbeat cannot claim OFFLINE");

    EmbodimentDelta delta;
    delta.robot = status.robot;
    delta.kind = DeltaKind::Heartbeat;
    delta.changed = {"availability", "resources", "sensors"};
    delta.payload = canon::json{{"resources", resources_json(status.resources)},
                                {"sensors", status.sensors},
                                {"availability", to_string(status.claim)}};
    return delta;
}

std::vector<EmbodimentDelta> sweep_offline(const EmbodimentRegistry& reg, std::int64_t now,
                                           std::int64_t offline_threshold) {
    std::vector<EmbodimentDelta> deltas;
    for (const auto& [id, prof] : reg) {
        if (prof.availability == Availability::Offline) continue;
        if (now - prof.last_heartbeat > offline_threshold) {
            EmbodimentDelta delta;
            delta.robot = id;
            delta.kind = DeltaKind::Sweep;
            delta.changed = {"availability"};
            delta.payload = canon::json{{"availability", "OFFLINE"}};
            deltas.push_back(std::move(delta));
        }
    }
    return deltas;
}

std::pair<std::string, EmbodimentDelta> snap_localization(const EmbodimentRegistry& reg,
                                                          const scene::SceneTree& tree,
                                                          const std::string& robot,
                                                          Vec2 position) {
    require_known(reg, robot);
    std::string best;
    double best_dist = 0.0;
    for (const auto& id : tree.carriers()) {
        const scene::SceneNode& node = tree.at(id);
        double d = (node.position - position).norm();
        if (best.empty()) {
            best = id;
            best_dist = d;
            continue;
        }
        const scene::SceneNode& incumbent = tree.at(best);
        if (d < best_dist ||
            (d == best_dist && std::tie(node.parent, id) < std::tie(incumbent.parent, best))) {
            best = id;
            best_dist = d;
        }
    }
    if (best.empty()) throw Error(Err::UnknownNode, "tree holds no carriers");

    EmbodimentDelta delta;
    delta.robot = robot;
    delta.kind = DeltaKind::Localize;
    delta.changed = {"location"};
    delta.payload = canon::json{{"location", best}};
    return {best, delta};
}

std::vector<std::string> find_capable(const EmbodimentRegistry& reg, const scene::SceneTree& tree,
                                      const std::string& tool, const std::string& near,
                                      bool include_busy) {
    struct Ranked {
        int hops;
        double map_dist;
        std::string id;
    };
    std::vector<Ranked> ranked;
    for (const auto& [id, prof] : reg) {
        if (!prof.capabilities.count(tool)) continue;
        if (prof.availability == Availability::Offline) continue;
        if (prof.availability == Availability::Busy && !include_busy) continue;
        int hops = 0;
        double map_dist = 0.0;
        if (!near.empty() && tree.contains(near) && tree.contains(prof.loc)) {
            hops = scene::tree_hop_distance(tree, near, prof.loc);
            map_dist = (tree.at(near).position - tree.at(prof.loc).position).norm();
        }
        ranked.push_back({hops, map_dist, id});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        return std::tie(a.hops, a.map_dist, a.id) < std::tie(b.hops, b.map_dist, b.id);
    });
    std::vector<std::string> out;
    for (auto& r : ranked) out.push_back(std::move(r.id));
    return out;
}

std::optional<EmbodimentDelta> make_hotplug(const EmbodimentRegistry& reg,
                                            const std::string& robot, const std::string& tool,
                                            bool attach) {
    require_known(reg, robot);
    const RobotProfile& prof = reg.at(robot);
    bool has = prof.capabilities.count(tool) > 0;
    if (attach && has) return std::nullopt;
    if (!attach && !has) throw Error(Err::DetachMissingTool, robot + " lacks " + tool);

    std::set<std::string> caps = prof.capabilities;
    if (attach)
        caps.insert(tool);
    else
        caps.erase(tool);

    EmbodimentDelta delta;
    delta.robot = robot;
    delta.kind = DeltaKind::Hotplug;
    delta.changed = {"capabilities"};
    delta.payload =
        canon::json{{"capabilities", std::vector<std::string>(caps.begin(), caps.end())}};
    return delta;
}

EmbodimentDelta make_availability(const std::string& robot, Availability value) {
    EmbodimentDelta delta;
    delta.robot = robot;
    delta.kind = DeltaKind::Availability;
    delta.changed = {"availability"};
    delta.payload = canon::json{{"availability", to_string(value)}};
    return delta;
}

void apply_delta(EmbodimentRegistry& reg, const scene::SceneTree& tree,
                 const EmbodimentDelta& delta, std::int64_t tau) {
    if (delta.changed.empty()) throw Error(Err::MalformedDelta, "empty changed set");
    for (const auto& key : delta.changed)
        if (!delta.payload.contains(key))
            throw Error(Err::MalformedDelta, "payload missing " + key);
    for (auto it = delta.payload.begin(); it != delta.payload.end(); ++it)
        if (!delta.changed.count(it.key()))
            throw Error(Err::MalformedDelta, "payload key not in changed: " + it.key());

    if (delta.kind == DeltaKind::Register) {
        if (reg.count(delta.robot)) throw Error(Err::DuplicateRobot, delta.robot);
        reg.emplace(delta.robot, RobotProfile{});
        reg.at(delta.robot).id = delta.robot;
    } else if (!reg.count(delta.robot)) {
        throw Error(Err::DanglingReference, "unknown robot " + delta.robot);
    }

    RobotProfile& prof = reg.at(delta.robot);
    for (const auto& key : delta.changed) {
        const canon::json& value = delta.payload.at(key);
        if (key == "location") {
            std::string loc = value.get<std::string>();
            if (!tree.contains(loc))
                throw Error(Err::DanglingReference, "unknown location " + loc);
            prof.loc = loc;
        } else if (key == "capabilities") {
            auto caps = value.get<std::vector<std::string>>();
            prof.capabilities = std::set<std::string>(caps.begin(), caps.end());
        } else if (key == "resources") {
            prof.resources = resources_from(value);
        } else if (key == "sensors") {
            prof.sensors = value.get<std::map<std::string, std::string>>();
        } else if (key == "availability") {
            prof.availability = availability_from_string(value.get<std::string>());
        } else {
            throw Error(Err::MalformedDelta, "unknown profile field " + key);
        }
    }
    if (delta.kind == DeltaKind::Register || delta.kind == DeltaKind::Heartbeat)
        prof.last_heartbeat = tau;
}

void to_json(canon::json& j, const Resources& r) { j = resources_json(r); }

void from_json(const canon::json& j, Resources& r) { r = resources_from(j); }

void to_json(canon::json& j, const RobotProfile& p) {
    j = canon::json{{"id", p.id},
                    {"loc", p.loc},
                    {"capabilities", std::vector<std::string>(p.capabilities.begin(),
                                                              p.capabilities.end())},
                    {"resources", resources_json(p.resources)},
                    {"sensors", p.sensors},
                    {"availability", to_string(p.availability)},
                    {"last_heartbeat", p.last_heartbeat}};
}

void from_json(const canon::json& j, RobotProfile& p) {
    p.id = j.at("id").get<std::string>();
    p.loc = j.at("loc").get<std::string>();
    auto caps = j.value("capabilities", std::vector<std::string>{});
    p.capabilities = std::set<std::string>(caps.begin(), caps.end());
    p.resources = resources_from(j.value("resources", canon::json::object()));
    p.sensors = j.value("sensors", std::map<std::string, std::string>{});
    p.availability = availability_from_string(j.value("availability", std::string{"IDLE"}));
    p.last_heartbeat = j.value("last_heartbeat", std::int64_t{0});
}

void to_json(canon::json& j, const EmbodimentDelta& d) {
    j = canon::json{{"robot", d.robot},
                    {"kind", to_string(d.kind)},
                    {"changed", std::vector<std::string>(d.changed.begin(), d.changed.end())},
                    {"payload", d.payload}};
}

void from_json(const canon::json& j, EmbodimentDelta& d) {
    d.robot = j.at("robot").get<std::string>();
    d.kind = delta_kind_from_string(j.at("kind").get<std::string>());
    auto changed = j.at("changed").get<std::vector<std::string>>();
    d.changed = std::set<std::string>(changed.begin(), changed.end());
    d.payload = j.at("payload");
}

}  // namespace fleetmind::robots
