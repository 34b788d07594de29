#include "fleetmind/sim.hpp"

#include <algorithm>
#include <sstream>

#include "fleetmind/errors.hpp"

namespace fleetmind::sim {

const char* to_string(FaultMode m) {
    switch (m) {
        case FaultMode::None: return "NONE";
        case FaultMode::E1Offline: return "E1";
        case FaultMode::E2ToolFail: return "E2";
        case FaultMode::E3Hallucination: return "E3";
    }
    return "?";
}

FaultMode fault_mode_from_string(const std::string& name) {
    if (name == "NONE" || name.empty()) return FaultMode::None;
    if (name == "E1" || name == "e1") return FaultMode::E1Offline;
    if (name == "E2" || name == "e2") return FaultMode::E2ToolFail;
    if (name == "E3" || name == "e3") return FaultMode::E3Hallucination;
    throw Error(Err::InvalidPlan, "unknown fault mode " + name);
}

void to_json(canon::json& j, const FaultPlan& p) {
    j = canon::json{{"mode", to_string(p.mode)},     {"trigger", p.trigger_tick},
                    {"robot", p.robot},              {"tool", p.tool},
                    {"persistent", p.persistent},    {"duration", p.duration},
                    {"rounds", p.rounds}};
}

void from_json(const canon::json& j, FaultPlan& p) {
    p.mode = fault_mode_from_string(j.value("mode", std::string{"NONE"}));
    p.trigger_tick = j.value("trigger", std::int64_t{0});
    p.robot = j.value("robot", std::string{});
    p.tool = j.value("tool", std::string{});
    p.persistent = j.value("persistent", true);
    p.duration = j.value("duration", std::int64_t{0});
    p.rounds = j.value("rounds", 1);
}

// ---- world generation ----

namespace {

struct CarrierRow {
    const char* id;
    const char* region;
    bool closable;
};

struct DomainTable {
    std::vector<const char*> regions;
    std::vector<CarrierRow> carriers;
    std::vector<std::pair<const char*, const char*>> priors;  // category -> carrier
};

const DomainTable& domain_table(const std::string& domain) {
    static const DomainTable household{
        {"kitchen", "living_room", "bedroom", "study", "laundry"},
        {{"dining_table", "kitchen", false},
         {"fridge", "kitchen", true},
         {"cabinet", "kitchen", true},
         {"sink_counter", "kitchen", false},
         {"coffee_table", "living_room", false},
         {"bookshelf", "living_room", false},
         {"storage_box", "living_room", true},
         {"tv_stand", "living_room", false},
         {"desk", "bedroom", false},
         {"dresser", "bedroom", true},
         {"nightstand", "bedroom", false},
         {"study_desk", "study", false},
         {"file_cabinet", "study", true},
         {"laundry_shelf", "laundry", false},
         {"hamper", "laundry", true}},
        {{"egg", "fridge"},       {"milk", "fridge"},         {"orange", "fridge"},
         {"apple", "fridge"},     {"cup", "cabinet"},         {"plate", "cabinet"},
         {"knife", "cabinet"},    {"bowl", "cabinet"},        {"book", "bookshelf"},
         {"remote", "tv_stand"},  {"pillow", "storage_box"},  {"towel", "laundry_shelf"},
         {"shirt", "dresser"},    {"pen", "desk"},            {"folder", "file_cabinet"},
         {"soap", "sink_counter"}}};
    static const DomainTable restaurant{
        {"kitchen", "dining_hall", "counter_area", "storage_room", "patio"},
        {{"prep_table", "kitchen", false},
         {"stove", "kitchen", false},
         {"fridge", "kitchen", true},
         {"pantry", "kitchen", true},
         {"table_one", "dining_hall", false},
         {"table_two", "dining_hall", false},
         {"table_three", "dining_hall", false},
         {"counter", "counter_area", false},
         {"register", "counter_area", false},
         {"storage_shelf", "storage_room", false},
         {"freezer", "storage_room", true},
         {"patio_table", "patio", false}},
        {{"patty", "fridge"},     {"bun", "pantry"},          {"lettuce", "fridge"},
         {"cheese", "fridge"},    {"tomato", "fridge"},       {"plate", "prep_table"},
         {"cup", "counter"},      {"tray", "counter"},        {"fries", "freezer"},
         {"napkin", "storage_shelf"}, {"bottle", "storage_shelf"}, {"menu", "register"},
         {"bowl", "prep_table"},  {"pan", "stove"},           {"ketchup", "fridge"},
         {"straw", "counter"}}};
    static const DomainTable supermarket{
        {"checkout_area", "stockroom", "aisle_one", "aisle_two", "produce_area"},
        {{"checkout_counter", "checkout_area", false},
         {"bagging_table", "checkout_area", false},
         {"gift_bin", "checkout_area", true},
         {"stock_shelf", "stockroom", false},
         {"cold_locker", "stockroom", true},
         {"shelf_a", "aisle_one", false},
         {"shelf_b", "aisle_one", false},
         {"shelf_c", "aisle_two", false},
         {"shelf_d", "aisle_two", false},
         {"produce_stand", "produce_area", false},
         {"crate", "produce_area", true}},
        {{"milk", "cold_locker"}, {"juice", "cold_locker"},   {"gift", "gift_bin"},
         {"bag", "bagging_table"}, {"cereal", "shelf_a"},     {"bread", "shelf_a"},
         {"soap", "shelf_b"},     {"candy", "shelf_c"},       {"toy", "shelf_d"},
         {"banana", "produce_stand"}, {"apple", "produce_stand"}, {"receipt", "checkout_counter"},
         {"chocolate", "shelf_c"}, {"magazine", "checkout_counter"}, {"detergent", "shelf_b"},
         {"sponge", "shelf_b"}}};
    if (domain == "HOUSEHOLD") return household;
    if (domain == "RESTAURANT") return restaurant;
    if (domain == "SUPERMARKET") return supermarket;
    throw Error(Err::CorruptScenario, "unknown domain " + domain);
}

struct LevelBand {
    int regions;
    int carriers_lo, carriers_hi;
    int total_lo, total_hi;
};

LevelBand level_band(const std::string& level) {
    if (level == "L1") return {2, 4, 5, 15, 19};
    if (level == "L2") return {3, 7, 8, 24, 30};
    if (level == "L3") return {5, 10, 12, 40, 50};
    throw Error(Err::CorruptScenario, "unknown level " + level);
}

}  // namespace

scene::WorldSpec generate_world(const std::string& domain, const std::string& level,
                                std::uint64_t seed) {
    const DomainTable& table = domain_table(domain);
    LevelBand band = level_band(level);
    Rng rng(Rng::mix(seed ^ Rng::mix(std::hash<std::string>{}(domain + "/" + level))));

    scene::WorldSpec world;
    world.domain = domain;
    world.level = level;
    world.seed = seed;

    std::set<std::string> chosen_regions;
    for (int i = 0; i < band.regions && i < static_cast<int>(table.regions.size()); ++i) {
        scene::RegionSpec region;
        region.id = table.regions[static_cast<std::size_t>(i)];
        region.position = scene::quantize_vec2({8.0 * i, 0.0});
        region.media = {"views/" + region.id + "_0", "views/" + region.id + "_1"};
        world.regions.push_back(region);
        chosen_regions.insert(region.id);
    }

    int carrier_target = static_cast<int>(rng.range(band.carriers_lo, band.carriers_hi));
    std::map<std::string, int> per_region_count;
    std::vector<std::string> open_carriers, closable_carriers;
    for (const auto& row : table.carriers) {
        if (static_cast<int>(world.carriers.size()) >= carrier_target) break;
        if (!chosen_regions.count(row.region)) continue;
        scene::CarrierSpec carrier;
        carrier.id = row.id;
        carrier.region = row.region;
        int slot = per_region_count[row.region]++;
        double rx = 0.0;
        for (std::size_t i = 0; i < world.regions.size(); ++i)
            if (world.regions[i].id == row.region) rx = world.regions[i].position.x;
        carrier.position = scene::quantize_vec2({rx + 1.5 * slot, 2.0 + (slot % 2)});
        if (row.closable) {
            carrier.affordances = {"closable"};
            carrier.state["door"] = "closed";
            closable_carriers.push_back(carrier.id);
        } else {
            open_carriers.push_back(carrier.id);
        }
        world.carriers.push_back(carrier);
    }

    std::set<std::string> chosen_carriers;
    for (const auto& c : world.carriers) chosen_carriers.insert(c.id);

    // Storage priors for every category, remapped onto chosen carriers so a
    // declared location always resolves.
    std::string fallback = closable_carriers.empty() ? world.carriers.front().id
                                                     : closable_carriers.front();
    std::vector<std::string> categories;
    for (const auto& [category, carrier] : table.priors) {
        categories.push_back(category);
        std::string target = chosen_carriers.count(carrier) ? carrier : fallback;
        world.storage_priors[category] = {target};
    }

    int total = static_cast<int>(
        rng.range(std::max(band.total_lo, 1 + band.regions + carrier_target + 3), band.total_hi));
    int object_target = total - 1 - band.regions - static_cast<int>(world.carriers.size());

    std::map<std::string, int> instance_count, slot_count;
    for (int k = 0; k < object_target; ++k) {
        const std::string& category = categories[static_cast<std::size_t>(k) % categories.size()];
        int instance = ++instance_count[category];
        scene::ObjectSpec obj;
        obj.id = category + "_" + std::to_string(instance);
        obj.category = category;
        // first instances mostly in the open so tasks have visible targets
        bool closed_home = instance == 1 ? rng.chance(0.15) : rng.chance(0.4);
        const std::vector<std::string>& pool =
            (closed_home && !closable_carriers.empty()) ? closable_carriers : open_carriers;
        obj.carrier = pool[static_cast<std::size_t>(rng.range(
            0, static_cast<std::int64_t>(pool.size()) - 1))];
        int slot = slot_count[obj.carrier]++;
        double ext = canon::quantize(rng.real(0.03, 0.07));
        obj.half_extents = {ext, ext, ext};
        obj.pose.t = scene::quantize_vec3(
            {-0.6 + 0.3 * (slot % 5), -0.6 + 0.3 * ((slot / 5) % 5), ext});
        world.objects.push_back(obj);
    }
    return world;
}

// ---- SimWorld ----

SimWorld::SimWorld(const scene::WorldSpec& world, const SimConfig& config,
                   const mem::Kernel* kernel)
    : truth_(scene::build_scene_tree(world)),
      kernel_(kernel),
      config_(config),
      drift_rng_(Rng::mix(config.seed * 1000003ULL + 17)) {}

bool SimWorld::responsive(const std::string& robot) const {
    auto it = suppressed_until_.find(robot);
    return it == suppressed_until_.end() || now_ >= it->second;
}

void SimWorld::add_fault(const FaultPlan& plan) {
    if (plan.mode == FaultMode::E2ToolFail) {
        const auto& reg = kernel_->state().embodiment;
        auto it = reg.find(plan.robot);
        if (it == reg.end() || !it->second.capabilities.count(plan.tool))
            throw Error(Err::InvalidPlan, "E2 target tool not held by " + plan.robot);
    }
    if (plan.mode == FaultMode::E1Offline && plan.robot.empty())
        throw Error(Err::InvalidPlan, "E1 needs a target robot");
    pending_faults_.push_back(plan);
}

void SimWorld::on_tick(std::int64_t tick, std::vector<canon::json>* trace) {
    now_ = tick;
    for (auto it = pending_faults_.begin(); it != pending_faults_.end();) {
        if (it->trigger_tick > tick) {
            ++it;
            continue;
        }
        switch (it->mode) {
            case FaultMode::E1Offline:
                suppressed_until_[it->robot] =
                    it->persistent ? std::numeric_limits<std::int64_t>::max()
                                   : tick + it->duration;
                break;
            case FaultMode::E2ToolFail:
                broken_.insert({it->robot, it->tool});
                break;
            case FaultMode::E3Hallucination:
                e3_rounds_ += it->rounds;
                break;
            case FaultMode::None:
                break;
        }
        if (trace)
            trace->push_back(canon::json{{"kind", "fault"},
                                         {"tick", tick},
                                         {"mode", to_string(it->mode)},
                                         {"robot", it->robot},
                                         {"tool", it->tool}});
        it = pending_faults_.erase(it);
    }

    if (config_.drift_per_tick > 0.0 && drift_rng_.chance(config_.drift_per_tick)) {
        if (drift_once() && trace)
            trace->push_back(canon::json{{"kind", "world"}, {"tick", tick}, {"event", "drift"}});
    }
}

void SimWorld::preshuffle(int moves) {
    for (int i = 0; i < moves; ++i) drift_once();
}

bool SimWorld::drift_once() {
    // Unobserved relocation: open carrier to open carrier, no event emitted.
    std::vector<std::pair<std::string, std::string>> movable;  // (carrier, object)
    std::vector<std::string> open_ids;
    for (const auto& id : truth_.carriers()) {
        const scene::SceneNode& node = truth_.at(id);
        auto door = node.state.find("door");
        bool open = door == node.state.end() || door->second == "open";
        if (!open) continue;
        open_ids.push_back(id);
        for (const auto& [oid, obj] : node.graph.nodes) movable.push_back({id, oid});
    }
    if (movable.empty() || open_ids.size() < 2) return false;
    auto [from, oid] = movable[static_cast<std::size_t>(
        drift_rng_.range(0, static_cast<std::int64_t>(movable.size()) - 1))];
    std::string to = from;
    for (int tries = 0; tries < 8 && to == from; ++tries)
        to = open_ids[static_cast<std::size_t>(
            drift_rng_.range(0, static_cast<std::int64_t>(open_ids.size()) - 1))];
    if (to == from) return false;

    scene::ObjectNode obj = truth_.at(from).graph.nodes.at(oid);
    scene::SceneNode& src = truth_.at(from);
    src.graph = scene::remove_object(std::move(src.graph), oid);
    int slot = placement_counter_++;
    obj.pose = RigidTransform{};
    obj.pose.t = scene::quantize_vec3(
        {-0.45 + 0.3 * (slot % 4), 0.45 - 0.3 * ((slot / 4) % 4), obj.half_extents.z});
    scene::SceneNode& dst = truth_.at(to);
    dst.graph = scene::add_object(std::move(dst.graph), obj, truth_.params);
    return true;
}

const scene::SceneNode* SimWorld::robot_carrier(const std::string& robot) const {
    const auto& reg = kernel_->state().embodiment;
    auto it = reg.find(robot);
    if (it == reg.end()) return nullptr;
    if (!truth_.contains(it->second.loc)) return nullptr;
    const scene::SceneNode& node = truth_.at(it->second.loc);
    return node.kind == scene::NodeKind::Carrier ? &node : nullptr;
}

ToolOutcome SimWorld::fail(const std::string& kind, const std::string& feedback) const {
    ToolOutcome out;
    out.status = mem::ToolStatus::Fail;
    out.fail_kind = kind;
    out.feedback = feedback;
    return out;
}

std::vector<mem::SpatialDelta> SimWorld::reconcile_carrier(const std::string& carrier) const {
    std::vector<mem::SpatialDelta> deltas;
    const mem::MemoryState& belief = kernel_->state();
    if (!belief.spatial.contains(carrier)) return deltas;
    const scene::ObjectGraph& seen = truth_.at(carrier).graph;
    const scene::ObjectGraph& believed = belief.spatial.at(carrier).graph;

    for (const auto& [oid, obj] : believed.nodes)
        if (!seen.contains(oid)) deltas.push_back(mem::make_remove(carrier, oid));
    for (const auto& [oid, obj] : seen.nodes) {
        if (!believed.contains(oid)) {
            auto stale = belief.spatial.carrier_of(oid);
            if (stale && *stale != carrier) deltas.push_back(mem::make_remove(*stale, oid));
            deltas.push_back(mem::make_add(carrier, obj));
            continue;
        }
        const scene::ObjectNode& old = believed.nodes.at(oid);
        Vec3 dt = obj.pose.t - old.pose.t;
        if (dt.norm() > 1e-6 || rotation_angle_between(obj.pose, old.pose) > 1e-6) {
            RigidTransform delta = obj.pose.compose(old.pose.inverse());
            deltas.push_back(mem::make_move(carrier, oid, delta));
        }
    }
    return deltas;
}

ToolOutcome SimWorld::invoke(const std::string& robot, const std::string& tool,
                             const std::map<std::string, std::string>& args) {
    const auto& reg = kernel_->state().embodiment;
    auto reg_it = reg.find(robot);
    if (reg_it == reg.end()) return fail(kUnknownTarget, "unregistered robot " + robot);
    if (!reg_it->second.capabilities.count(tool))
        return fail(kCapabilityMissing, robot + " has no " + tool);
    if (broken_.count({robot, tool}))
        return fail(kToolBroken, tool + " malfunction on " + robot);

    auto arg = [&](const char* key) {
        auto it = args.find(key);
        return it == args.end() ? std::string{} : it->second;
    };

    if (tool == "navigate") {
        std::string target = arg("target");
        if (!truth_.contains(target)) return fail(kUnknownTarget, "unknown node " + target);
        ToolOutcome out;
        if (reg_it->second.loc == target) {
            out.feedback = "already at " + target;
            return out;  // no-op, zero delta
        }
        robots::EmbodimentDelta delta;
        delta.robot = robot;
        delta.kind = robots::DeltaKind::Localize;
        delta.changed = {"location"};
        delta.payload = canon::json{{"location", target}};
        out.embodiment_delta = delta;
        out.feedback = "arrived at " + target;
        return out;
    }

    if (tool == "detect") {
        const scene::SceneNode* carrier = robot_carrier(robot);
        if (!carrier) return fail(kNotAtCarrier, robot + " is not at a carrier");
        auto door = carrier->state.find("door");
        if (door != carrier->state.end() && door->second == "closed")
            return fail(kClosed, carrier->id + " is closed");
        std::string category = arg("category");
        std::vector<std::string> ids;
        for (const auto& [oid, obj] : carrier->graph.nodes)
            if (category.empty() || obj.category == category) ids.push_back(oid);
        ToolOutcome out;
        out.spatial_deltas = reconcile_carrier(carrier->id);
        if (ids.empty()) {
            out.status = mem::ToolStatus::Fail;
            out.fail_kind = kNoObject;
            out.feedback = "no " + category + " detected on " + carrier->id;
            return out;
        }
        std::string joined;
        for (const auto& id : ids) joined += (joined.empty() ? "" : ",") + id;
        out.feedback = "detected " + joined + " on " + carrier->id;
        return out;
    }

    if (tool == "pick") {
        const scene::SceneNode* carrier = robot_carrier(robot);
        if (!carrier) return fail(kNotAtCarrier, robot + " is not at a carrier");
        auto door = carrier->state.find("door");
        if (door != carrier->state.end() && door->second == "closed")
            return fail(kClosed, carrier->id + " is closed");
        std::string category = arg("category");
        std::string id = arg("id");
        auto& held = gripper_[robot];
        if (held && ((!id.empty() && held->id == id) ||
                     (!category.empty() && held->category == category))) {
            ToolOutcome out;
            out.feedback = "already holding " + held->id;
            return out;  // idempotent
        }
        if (held) return fail(kGripperFull, robot + " already holds " + held->id);

        std::string found;
        for (const auto& [oid, obj] : carrier->graph.nodes) {
            if (!id.empty() && oid == id) found = oid;
            if (id.empty() && !category.empty() && obj.category == category) {
                found = oid;
                break;
            }
        }
        if (found.empty())
            return fail(kNoObject, "no " + (id.empty() ? category : id) + " on " + carrier->id);

        scene::ObjectNode obj = carrier->graph.nodes.at(found);
        scene::SceneNode& node = truth_.at(carrier->id);
        node.graph = scene::remove_object(std::move(node.graph), found);
        held = obj;

        ToolOutcome out;
        auto believed = kernel_->state().spatial.carrier_of(found);
        if (believed) out.spatial_deltas.push_back(mem::make_remove(*believed, found));
        out.feedback = "picked " + found;
        return out;
    }

    if (tool == "place") {
        std::string target = arg("target");
        if (target.empty() && robot_carrier(robot)) target = robot_carrier(robot)->id;
        if (!truth_.contains(target)) return fail(kUnknownTarget, "unknown node " + target);
        if (kernel_->state().embodiment.at(robot).loc != target)
            return fail(kNotAtCarrier, robot + " is not at " + target);
        scene::SceneNode& node = truth_.at(target);
        if (node.kind != scene::NodeKind::Carrier)
            return fail(kNotAtCarrier, target + " is not a carrier");
        auto door = node.state.find("door");
        if (door != node.state.end() && door->second == "closed")
            return fail(kClosed, target + " is closed");
        auto& held = gripper_[robot];
        if (!held) return fail(kNotHolding, robot + " holds nothing");

        scene::ObjectNode obj = *held;
        int slot = placement_counter_++;
        obj.pose = RigidTransform{};
        obj.pose.t = scene::quantize_vec3(
            {0.45 - 0.3 * (slot % 4), -0.45 + 0.3 * ((slot / 4) % 4), obj.half_extents.z});
        node.graph = scene::add_object(std::move(node.graph), obj, truth_.params);
        held.reset();

        ToolOutcome out;
        auto stale = kernel_->state().spatial.carrier_of(obj.id);
        if (stale) out.spatial_deltas.push_back(mem::make_remove(*stale, obj.id));
        out.spatial_deltas.push_back(mem::make_add(target, obj));
        out.feedback = "placed " + obj.id + " on " + target;
        return out;
    }

    if (tool == "open" || tool == "close") {
        std::string target = arg("target");
        if (target.empty() && robot_carrier(robot)) target = robot_carrier(robot)->id;
        if (!truth_.contains(target)) return fail(kUnknownTarget, "unknown node " + target);
        if (kernel_->state().embodiment.at(robot).loc != target)
            return fail(kNotAtCarrier, robot + " is not at " + target);
        scene::SceneNode& node = truth_.at(target);
        bool closable = std::find(node.affordances.begin(), node.affordances.end(),
                                  "closable") != node.affordances.end();
        if (!closable) return fail(kUnknownTarget, target + " has no door");
        std::string want = tool == "open" ? "open" : "closed";
        ToolOutcome out;
        if (node.state["door"] == want) {
            out.feedback = target + " already " + want;
            return out;
        }
        node.state["door"] = want;
        out.spatial_deltas.push_back(mem::make_state_edit("", target, {{"door", want}}));
        out.feedback = target + " now " + want;
        return out;
    }

    if (tool == "handover") {
        std::string peer = arg("robot");
        auto peer_it = reg.find(peer);
        if (peer_it == reg.end()) return fail(kUnknownTarget, "unknown robot " + peer);
        if (peer_it->second.loc != reg_it->second.loc)
            return fail(kNotAtCarrier, peer + " is not co-located");
        auto& held = gripper_[robot];
        if (!held) return fail(kNotHolding, robot + " holds nothing");
        auto& peer_hand = gripper_[peer];
        if (peer_hand) return fail(kGripperFull, peer + " already holds " + peer_hand->id);
        peer_hand = held;
        held.reset();
        ToolOutcome out;
        out.feedback = "handed " + peer_hand->id + " to " + peer;
        return out;
    }

    if (tool == "prepare") {
        const scene::SceneNode* carrier = robot_carrier(robot);
        if (!carrier) return fail(kNotAtCarrier, robot + " is not at a carrier");
        std::string category = arg("category");
        std::string found;
        for (const auto& [oid, obj] : carrier->graph.nodes)
            if (obj.category == category) found = oid;
        if (found.empty()) return fail(kNoObject, "no " + category + " on " + carrier->id);
        truth_.at(carrier->id).graph.nodes.at(found).state["prepared"] = "true";
        ToolOutcome out;
        out.spatial_deltas.push_back(
            mem::make_state_edit(carrier->id, found, {{"prepared", "true"}}));
        out.feedback = "prepared " + found;
        return out;
    }

    if (tool == "hold") {
        ToolOutcome out;
        out.feedback = "steadying " + arg("target");
        return out;
    }

    return fail(kCapabilityMissing, "unimplemented tool " + tool);
}

bool SimWorld::conservation_ok() const {
    std::map<std::string, int> sightings;
    for (const auto& id : truth_.carriers())
        for (const auto& [oid, obj] : truth_.at(id).graph.nodes) ++sightings[oid];
    for (const auto& [robot, held] : gripper_)
        if (held) ++sightings[held->id];
    for (const auto& [oid, count] : sightings)
        if (count != 1) return false;
    return true;
}

std::size_t SimWorld::object_count() const {
    std::size_t count = 0;
    for (const auto& id : truth_.carriers()) count += truth_.at(id).graph.nodes.size();
    for (const auto& [robot, held] : gripper_)
        if (held) ++count;
    return count;
}

// ---- Simulation ----

namespace {

std::vector<std::string> default_capabilities() {
    return {"navigate", "detect", "pick", "place", "open", "close", "hold", "handover", "prepare"};
}

}  // namespace

Simulation::Simulation(Scenario scenario) : scenario_(std::move(scenario)) {
    mem::MemoryState initial;
    initial.spatial = scene::build_scene_tree(scenario_.world);
    kernel_ = std::make_unique<mem::Kernel>(std::move(initial));
    base_snapshot_ = mem::snapshot(kernel_->state());

    world_ = std::make_unique<SimWorld>(scenario_.world, scenario_.config, kernel_.get());

    trace_.push_back(canon::json{{"kind", "run_meta"},
                                 {"domain", scenario_.world.domain},
                                 {"level", scenario_.world.level},
                                 {"seed", scenario_.config.seed},
                                 {"memory", scenario_.config.memory},
                                 {"ablate", scenario_.config.ablate},
                                 {"tasks", scenario_.tasks.size()}});

    kernel_->set_tick(0);
    for (const auto& spec : scenario_.robots) {
        robots::RobotProfile profile;
        profile.id = spec.id;
        profile.loc = spec.region;
        auto caps = spec.capabilities.empty() ? default_capabilities() : spec.capabilities;
        profile.capabilities = std::set<std::string>(caps.begin(), caps.end());
        profile.resources.battery = spec.battery;
        mem::Event event;
        event.embodiment =
            robots::make_registration(kernel_->state().embodiment, kernel_->state().spatial,
                                      profile);
        kernel_->append(std::move(event));
    }

    world_->preshuffle(scenario_.config.preshuffle);
    for (const auto& fault : scenario_.faults) world_->add_fault(fault);

    orch::OrchestratorConfig ocfg;
    ocfg.subtask_budget = scenario_.config.subtask_budget;
    ocfg.task_budget = scenario_.config.task_budget;
    ocfg.retry_budget = scenario_.config.retry_budget;
    ocfg.replan_budget = scenario_.config.replan_budget;
    ocfg.use_spatial = scenario_.config.use_spatial();
    ocfg.use_temporal = scenario_.config.use_temporal();
    ocfg.use_embodiment = scenario_.config.use_embodiment();
    ocfg.seed = scenario_.config.seed;

    plan::Brain brain = [this](const plan::PlannerContext& ctx) {
        if (world_->e3_armed()) {
            bool grounded = false;
            for (const auto& line : ctx.digest.feedback)
                if (line.find("plan rejected") != std::string::npos) grounded = true;
            if (!grounded) {
                world_->consume_e3_round();
                plan::PlanResult bad = plan::decompose(ctx);
                if (!bad.graph.subtasks.empty()) {
                    bad.graph.subtasks[0].hint = "room_99";
                    for (auto& role : bad.graph.subtasks[0].roles)
                        for (auto& goal : role)
                            if (goal.tool == "navigate") {
                                goal.args["target"] = "room_99";
                                break;
                            }
                }
                bad.trace.push_back("grounding drifted: target room_99");
                return bad;
            }
        }
        return plan::decompose(ctx);
    };

    orch_ = std::make_unique<orch::Orchestrator>(*kernel_, *world_, brain, ocfg);
    orch_->set_trace(&trace_);
}

void Simulation::heartbeat_phase(std::int64_t tick) {
    if (tick % scenario_.config.heartbeat_period == 0) {
        for (const auto& spec : scenario_.robots) {
            if (!world_->responsive(spec.id)) continue;
            const auto& reg = kernel_->state().embodiment;
            auto it = reg.find(spec.id);
            if (it == reg.end()) continue;
            robots::HeartbeatStatus status;
            status.robot = spec.id;
            status.tick = tick;
            status.resources = it->second.resources;
            status.sensors = it->second.sensors;
            status.claim = it->second.availability == robots::Availability::Busy
                               ? robots::Availability::Busy
                               : robots::Availability::Idle;
            mem::Event event;
            event.embodiment = robots::make_heartbeat(reg, status);
            kernel_->append(std::move(event));
        }
    }
    auto deltas = robots::sweep_offline(kernel_->state().embodiment, tick,
                                        scenario_.config.offline_threshold);
    for (auto& delta : deltas) {
        mem::Event event;
        event.embodiment = std::move(delta);
        kernel_->append(std::move(event));
    }
}

void Simulation::submit_phase(std::int64_t tick) {
    while (next_task_ < scenario_.tasks.size()) {
        const plan::GlobalTask& task = scenario_.tasks[next_task_];
        if (task.arrival > tick) break;
        if (scenario_.config.chain_tasks && next_task_ > 0) {
            const std::string& prev = scenario_.tasks[next_task_ - 1].id;
            if (!orch_->task_terminal(prev)) break;
        }
        orch_->submit_task(task);
        ++next_task_;
    }
}

metrics::RunReport Simulation::run() {
    std::int64_t tick = 0;
    while (tick < scenario_.config.max_ticks) {
        ++tick;
        kernel_->set_tick(tick);
        world_->on_tick(tick, &trace_);
        heartbeat_phase(tick);
        submit_phase(tick);
        orch_->step(tick);

        if (next_task_ >= scenario_.tasks.size()) {
            bool all_done = true;
            for (const auto& task : scenario_.tasks)
                if (!orch_->task_terminal(task.id)) all_done = false;
            if (all_done) break;
        }
    }

    metrics::RunReport report;
    report.seed = scenario_.config.seed;
    report.config = canon::json{{"memory", scenario_.config.memory},
                                {"ablate", scenario_.config.ablate},
                                {"task_budget", scenario_.config.task_budget}};
    for (const auto& task : scenario_.tasks) {
        metrics::TaskRecord record;
        record.task = task.id;
        record.domain = scenario_.world.domain;
        record.level = scenario_.world.level;
        record.sq = task.sq_index;
        record.sq_len = task.sq_len;
        if (orch_->tasks().count(task.id)) {
            const orch::TaskRuntime& rt = orch_->task_runtime(task.id);
            record.completed = rt.terminal && rt.completed;
            record.steps = rt.steps;
            if (!record.completed)
                record.stage = orch::failure_stage(
                    rt.terminal ? rt.cause : orch::FailureCause::BudgetExhausted,
                    rt.last_fail_kind);
        } else {
            record.stage = "unattributed";  // never submitted (wall clock ran out)
        }
        report.tasks.push_back(std::move(record));
    }
    return report;
}

std::string Simulation::trace_text() const {
    std::string out;
    for (const auto& line : trace_) {
        out += canon::dump(line);
        out += '\n';
    }
    return out;
}

// ---- scenario io ----

canon::json scenario_to_json(const Scenario& s) {
    canon::json robots = canon::json::array();
    for (const auto& r : s.robots)
        robots.push_back(canon::json{{"id", r.id},
                                     {"region", r.region},
                                     {"capabilities", r.capabilities},
                                     {"battery", r.battery}});
    canon::json tasks = canon::json::array();
    for (const auto& t : s.tasks) tasks.push_back(t);
    canon::json faults = canon::json::array();
    for (const auto& f : s.faults) faults.push_back(f);
    return canon::json{{"world", s.world},
                       {"robots", robots},
                       {"tasks", tasks},
                       {"faults", faults},
                       {"config",
                        canon::json{{"seed", s.config.seed},
                                    {"memory", s.config.memory},
                                    {"ablate", s.config.ablate},
                                    {"drift", s.config.drift_per_tick},
                                    {"preshuffle", s.config.preshuffle},
                                    {"task_budget", s.config.task_budget},
                                    {"subtask_budget", s.config.subtask_budget},
                                    {"retry_budget", s.config.retry_budget},
                                    {"replan_budget", s.config.replan_budget},
                                    {"heartbeat_period", s.config.heartbeat_period},
                                    {"offline_threshold", s.config.offline_threshold},
                                    {"max_ticks", s.config.max_ticks},
                                    {"chain_tasks", s.config.chain_tasks}}}};
}

Scenario scenario_from_json(const canon::json& j) {
    Scenario s;
    try {
        if (j.contains("world_gen")) {
            const auto& g = j.at("world_gen");
            s.world = generate_world(g.value("domain", std::string{"HOUSEHOLD"}),
                                     g.value("level", std::string{"L1"}),
                                     g.value("seed", std::uint64_t{0}));
        } else {
            s.world = j.at("world").get<scene::WorldSpec>();
        }
        for (const auto& item : j.value("robots", canon::json::array())) {
            RobotSpec r;
            r.id = item.at("id").get<std::string>();
            r.region = item.at("region").get<std::string>();
            r.capabilities = item.value("capabilities", std::vector<std::string>{});
            r.battery = item.value("battery", 100.0);
            s.robots.push_back(std::move(r));
        }
        for (const auto& item : j.value("tasks", canon::json::array()))
            s.tasks.push_back(item.get<plan::GlobalTask>());
        for (const auto& item : j.value("faults", canon::json::array()))
            s.faults.push_back(item.get<FaultPlan>());
        if (j.contains("config")) {
            const auto& c = j.at("config");
            s.config.seed = c.value("seed", std::uint64_t{1});
            s.config.memory = c.value("memory", true);
            s.config.ablate = c.value("ablate", std::string{});
            s.config.drift_per_tick = c.value("drift", 0.0);
            s.config.preshuffle = c.value("preshuffle", 0);
            s.config.task_budget = c.value("task_budget", 120);
            s.config.subtask_budget = c.value("subtask_budget", 40);
            s.config.retry_budget = c.value("retry_budget", 2);
            s.config.replan_budget = c.value("replan_budget", 2);
            s.config.heartbeat_period =
                c.value("heartbeat_period", robots::kDefaultHeartbeatPeriod);
            s.config.offline_threshold =
                c.value("offline_threshold", robots::kDefaultOfflineThreshold);
            s.config.max_ticks = c.value("max_ticks", std::int64_t{5000});
            s.config.chain_tasks = c.value("chain_tasks", true);
        }
    } catch (const canon::json::exception& e) {
        throw Error(Err::CorruptScenario, e.what());
    }
    return s;
}

// ---- suite scenario shapes ----

namespace {

/// Categories with exactly one instance, split by whether that instance
/// starts in the open.
void unique_categories(const scene::WorldSpec& world, std::vector<std::string>* open_cats,
                       std::vector<std::string>* closed_cats) {
    std::map<std::string, int> count;
    std::map<std::string, std::string> first_carrier;
    std::set<std::string> closable;
    for (const auto& c : world.carriers)
        if (std::find(c.affordances.begin(), c.affordances.end(), "closable") !=
            c.affordances.end())
            closable.insert(c.id);
    for (const auto& o : world.objects) {
        ++count[o.category];
        first_carrier[o.category] = o.carrier;
    }
    for (const auto& [category, n] : count) {
        if (n != 1) continue;
        if (closable.count(first_carrier[category]))
            closed_cats->push_back(category);
        else
            open_cats->push_back(category);
    }
}

std::string serving_carrier(const scene::WorldSpec& world) {
    for (const auto& c : world.carriers)
        if (std::find(c.affordances.begin(), c.affordances.end(), "closable") ==
            c.affordances.end())
            return c.id;
    return world.carriers.front().id;
}

std::vector<std::string> closable_carriers(const scene::WorldSpec& world) {
    std::vector<std::string> out;
    for (const auto& c : world.carriers)
        if (std::find(c.affordances.begin(), c.affordances.end(), "closable") !=
            c.affordances.end())
            out.push_back(c.id);
    return out;
}

std::vector<std::string> open_carriers(const scene::WorldSpec& world) {
    std::vector<std::string> out;
    for (const auto& c : world.carriers)
        if (std::find(c.affordances.begin(), c.affordances.end(), "closable") ==
            c.affordances.end())
            out.push_back(c.id);
    return out;
}

}  // namespace

Scenario make_lifelong_scenario(const LifelongParams& p) {
    Scenario s;
    s.world = generate_world(p.domain, p.level, p.seed);
    Rng rng(Rng::mix(p.seed * 31 + static_cast<std::uint64_t>(p.sq)));

    s.robots.push_back({"r1", s.world.regions[0].id, {}, 100.0});
    s.robots.push_back({"r2", s.world.regions[1 % s.world.regions.size()].id, {}, 100.0});

    std::vector<std::string> open_cats, closed_cats;
    unique_categories(s.world, &open_cats, &closed_cats);
    std::string serve = serving_carrier(s.world);
    auto hide_pool = closable_carriers(s.world);
    auto open_pool = open_carriers(s.world);

    std::vector<std::string> stored;
    int stores = std::min(p.sq - 1, static_cast<int>(open_cats.size()));
    for (int k = 1; k <= stores; ++k) {
        std::size_t pick = static_cast<std::size_t>(
            rng.range(0, static_cast<std::int64_t>(open_cats.size()) - 1));
        std::string item = open_cats[pick];
        open_cats.erase(open_cats.begin() + static_cast<std::ptrdiff_t>(pick));
        bool hide = !hide_pool.empty() && rng.chance(p.hide_prob);
        std::string dest =
            hide ? rng.pick(hide_pool)
                 : open_pool[static_cast<std::size_t>(
                       rng.range(0, static_cast<std::int64_t>(open_pool.size()) - 1))];
        plan::GlobalTask task;
        task.id = "g" + std::to_string(k);
        task.tmpl = plan::TaskTemplate::Deliver;
        task.items = {item};
        task.dest = dest;
        task.instruction = "move the " + item + " to the " + dest;
        task.sq_index = k;
        task.sq_len = p.sq;
        s.tasks.push_back(std::move(task));
        stored.push_back(item);
    }

    plan::GlobalTask final_task;
    final_task.id = "g" + std::to_string(stores + 1);
    final_task.sq_index = stores + 1;
    final_task.sq_len = p.sq;
    if (stored.empty()) {
        std::string item;
        if (!closed_cats.empty() && rng.chance(0.25))
            item = rng.pick(closed_cats);
        else if (!open_cats.empty())
            item = rng.pick(open_cats);
        else
            item = s.world.objects.front().category;
        final_task.tmpl = plan::TaskTemplate::Fetch;
        final_task.items = {item};
        final_task.instruction = "fetch the " + item + " to the " + serve;
    } else {
        final_task.tmpl = plan::TaskTemplate::Gather;
        final_task.items = stored;
        std::string joined;
        for (const auto& item : stored) joined += (joined.empty() ? "" : ", ") + item;
        final_task.instruction = "gather " + joined + " on the " + serve;
    }
    final_task.dest = serve;
    s.tasks.push_back(std::move(final_task));

    s.config.seed = p.seed;
    s.config.memory = p.memory_on;
    s.config.drift_per_tick = p.drift;
    s.config.task_budget = p.task_budget;
    s.config.chain_tasks = true;
    return s;
}

Scenario make_scalability_scenario(const ScalabilityParams& p) {
    Scenario s;
    s.world = generate_world(p.domain, p.level, p.seed);
    Rng rng(Rng::mix(p.seed * 97 + 5));

    for (int i = 0; i < p.team; ++i) {
        s.robots.push_back({"r" + std::to_string(i + 1),
                            s.world.regions[static_cast<std::size_t>(i) % s.world.regions.size()]
                                .id,
                            {},
                            100.0});
    }

    std::vector<std::string> open_cats, closed_cats;
    unique_categories(s.world, &open_cats, &closed_cats);
    rng.shuffle(open_cats);
    std::string serve = serving_carrier(s.world);

    int n_tasks = std::min(p.tasks, static_cast<int>(open_cats.size()) / p.items_per_task);
    std::size_t cursor = 0;
    for (int k = 1; k <= n_tasks; ++k) {
        plan::GlobalTask task;
        task.id = "g" + std::to_string(k);
        task.tmpl = plan::TaskTemplate::Gather;
        for (int i = 0; i < p.items_per_task; ++i) task.items.push_back(open_cats[cursor++]);
        task.dest = serve;
        std::string joined;
        for (const auto& item : task.items) joined += (joined.empty() ? "" : ", ") + item;
        task.instruction = "gather " + joined + " on the " + serve;
        task.arrival = k;  // staggered so allocation sees live availability
        s.tasks.push_back(std::move(task));
    }

    s.config.seed = p.seed;
    s.config.memory = true;
    s.config.drift_per_tick = p.drift;
    s.config.chain_tasks = false;
    return s;
}

Scenario make_robustness_scenario(const RobustnessParams& p) {
    Scenario s;
    s.world = generate_world(p.domain, p.level, p.seed);
    Rng rng(Rng::mix(p.seed * 193 + static_cast<std::uint64_t>(p.mode)));

    std::vector<std::string> open_cats, closed_cats;
    unique_categories(s.world, &open_cats, &closed_cats);
    std::string item;
    if (!closed_cats.empty() && rng.chance(p.hide_prob))
        item = rng.pick(closed_cats);
    else if (!open_cats.empty())
        item = rng.pick(open_cats);
    else
        item = s.world.objects.front().category;

    std::string serve = serving_carrier(s.world);
    std::string serve_region;
    for (const auto& c : s.world.carriers)
        if (c.id == serve) serve_region = c.region;

    // r1 sits by the serving area: the baseline's dest-anchored ranking
    // routes work to it, which is what the injected faults target.
    s.robots.push_back({"r1", serve_region, {}, 100.0});
    s.robots.push_back(
        {"r2", s.world.regions[1 % s.world.regions.size()].id, {}, 100.0});
    s.robots.push_back({"r3", s.world.regions[0].id, {}, 100.0});

    plan::GlobalTask task;
    task.id = "g1";
    task.tmpl = plan::TaskTemplate::Fetch;
    task.items = {item};
    task.dest = serve;
    task.instruction = "fetch the " + item + " to the " + serve;
    s.tasks.push_back(std::move(task));

    FaultPlan fault;
    fault.mode = p.mode;
    switch (p.mode) {
        case FaultMode::None:
            break;
        case FaultMode::E1Offline:
            fault.robot = "r1";
            fault.trigger_tick = p.e1_trigger;
            fault.persistent = true;
            s.faults.push_back(fault);
            break;
        case FaultMode::E2ToolFail:
            fault.robot = "r1";
            fault.tool = "pick";
            fault.trigger_tick = 0;
            fault.persistent = true;
            s.faults.push_back(fault);
            break;
        case FaultMode::E3Hallucination:
            fault.trigger_tick = 0;
            fault.rounds = rng.chance(0.5) ? 1 : 3;
            s.faults.push_back(fault);
            break;
    }

    s.config.seed = p.seed;
    s.config.memory = p.memory_on;
    s.config.drift_per_tick = 0.02;
    s.config.chain_tasks = true;
    return s;
}

Scenario make_ablation_scenario(const AblationParams& p) {
    Scenario s;
    s.world = generate_world(p.domain, p.level, p.seed);
    Rng rng(Rng::mix(p.seed * 389 + 11));

    s.robots.push_back({"r1", s.world.regions[0].id, {}, 100.0});
    s.robots.push_back({"r2", s.world.regions[1 % s.world.regions.size()].id, {}, 100.0});

    std::vector<std::string> open_cats, closed_cats;
    unique_categories(s.world, &open_cats, &closed_cats);
    std::string item;
    if (!closed_cats.empty() && rng.chance(p.hide_prob))
        item = rng.pick(closed_cats);
    else if (!open_cats.empty())
        item = rng.pick(open_cats);
    else
        item = s.world.objects.front().category;
    std::string serve = serving_carrier(s.world);

    plan::GlobalTask task;
    task.id = "g1";
    task.tmpl = plan::TaskTemplate::Fetch;
    task.items = {item};
    task.dest = serve;
    task.instruction = "fetch the " + item + " to the " + serve;
    s.tasks.push_back(std::move(task));

    s.config.seed = p.seed;
    s.config.memory = true;
    s.config.ablate = p.ablate;
    s.config.preshuffle = p.preshuffle;
    s.config.drift_per_tick = 0.03;
    s.config.chain_tasks = true;
    return s;
}

}  // namespace fleetmind::sim
