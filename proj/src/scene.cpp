#include "fleetmind/scene.hpp"

#include <algorithm>
#include <deque>
#include <limits>

#include "fleetmind/errors.hpp"

namespace fleetmind::scene {

const char* to_string(Relation rel) {
    switch (rel) {
        case Relation::On: return "ON";
        case Relation::In: return "IN";
        case Relation::Left: return "LEFT";
        case Relation::Right: return "RIGHT";
        case Relation::Front: return "FRONT";
        case Relation::Back: return "BACK";
        case Relation::Near: return "NEAR";
    }
    return "?";
}

Relation relation_from_string(const std::string& name) {
    for (Relation rel : kAllRelations)
        if (name == to_string(rel)) return rel;
    throw Error(Err::MalformedDelta, "unknown relation " + name);
}

const char* to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::Root: return "ROOT";
        case NodeKind::Region: return "REGION";
        case NodeKind::Carrier: return "CARRIER";
    }
    return "?";
}

NodeKind node_kind_from_string(const std::string& name) {
    if (name == "ROOT") return NodeKind::Root;
    if (name == "REGION") return NodeKind::Region;
    if (name == "CARRIER") return NodeKind::Carrier;
    throw Error(Err::CorruptSnapshot, "unknown node kind " + name);
}

Aabb box_aabb(const RigidTransform& pose, const Vec3& half) {
    Aabb box{{1e300, 1e300, 1e300}, {-1e300, -1e300, -1e300}};
    for (int sx = -1; sx <= 1; sx += 2) {
        for (int sy = -1; sy <= 1; sy += 2) {
            for (int sz = -1; sz <= 1; sz += 2) {
                Vec3 corner = pose.apply({sx * half.x, sy * half.y, sz * half.z});
                box.lo.x = std::min(box.lo.x, corner.x);
                box.lo.y = std::min(box.lo.y, corner.y);
                box.lo.z = std::min(box.lo.z, corner.z);
                box.hi.x = std::max(box.hi.x, corner.x);
                box.hi.y = std::max(box.hi.y, corner.y);
                box.hi.z = std::max(box.hi.z, corner.z);
            }
        }
    }
    return box;
}

Vec2 quantize_vec2(const Vec2& v) { return {canon::quantize(v.x), canon::quantize(v.y)}; }

Vec3 quantize_vec3(const Vec3& v) {
    return {canon::quantize(v.x), canon::quantize(v.y), canon::quantize(v.z)};
}

RigidTransform quantize_transform(const RigidTransform& t) {
    RigidTransform out;
    for (int i = 0; i < 9; ++i) out.r[i] = canon::quantize(t.r[i]);
    out.t = quantize_vec3(t.t);
    return out;
}

namespace {

double overlap_1d(double lo1, double hi1, double lo2, double hi2) {
    return std::max(0.0, std::min(hi1, hi2) - std::max(lo1, lo2));
}

}  // namespace

bool eval_relation(Relation rel, const RigidTransform& pose_a, const Vec3& ext_a,
                   const RigidTransform& pose_b, const Vec3& ext_b,
                   const PredicateParams& params) {
    switch (rel) {
        case Relation::Near: {
            return (pose_a.t - pose_b.t).norm() <= params.near_radius;
        }
        case Relation::On: {
            Aabb a = box_aabb(pose_a, ext_a);
            Aabb b = box_aabb(pose_b, ext_b);
            if (pose_a.t.z <= pose_b.t.z) return false;  // supported object sits higher
            if (std::fabs(a.lo.z - b.hi.z) > params.on_z_tol) return false;
            double ox = overlap_1d(a.lo.x, a.hi.x, b.lo.x, b.hi.x);
            double oy = overlap_1d(a.lo.y, a.hi.y, b.lo.y, b.hi.y);
            double area_a = (a.hi.x - a.lo.x) * (a.hi.y - a.lo.y);
            if (area_a <= 0.0) return false;
            return ox * oy >= params.on_overlap_min * area_a;
        }
        case Relation::In: {
            Aabb a = box_aabb(pose_a, ext_a);
            Aabb b = box_aabb(pose_b, ext_b);
            double s = params.in_shrink;
            return a.lo.x >= b.lo.x + s && a.hi.x <= b.hi.x - s && a.lo.y >= b.lo.y + s &&
                   a.hi.y <= b.hi.y - s && a.lo.z >= b.lo.z + s && a.hi.z <= b.hi.z - s;
        }
        case Relation::Left:
        case Relation::Right:
        case Relation::Front:
        case Relation::Back: {
            // Carrier-frame axes: +x rightward, +y backward.
            double dx = pose_a.t.x - pose_b.t.x;
            double dy = pose_a.t.y - pose_b.t.y;
            if (rel == Relation::Left)
                return -dx > std::fabs(dy) && -dx > params.dir_margin;
            if (rel == Relation::Right)
                return dx > std::fabs(dy) && dx > params.dir_margin;
            if (rel == Relation::Front)
                return -dy > std::fabs(dx) && -dy > params.dir_margin;
            return dy > std::fabs(dx) && dy > params.dir_margin;
        }
    }
    return false;
}

bool eval_relation(Relation rel, const ObjectNode& a, const ObjectNode& b,
                   const PredicateParams& params) {
    return eval_relation(rel, a.pose, a.half_extents, b.pose, b.half_extents, params);
}

namespace {

void eval_pair_into(std::set<RelationEdge>& edges, const ObjectNode& a, const ObjectNode& b,
                    const PredicateParams& params) {
    for (Relation rel : kAllRelations) {
        if (eval_relation(rel, a, b, params)) edges.insert({a.id, rel, b.id});
    }
}

void drop_incident(std::set<RelationEdge>& edges, const std::string& id) {
    for (auto it = edges.begin(); it != edges.end();) {
        if (it->subject == id || it->object == id)
            it = edges.erase(it);
        else
            ++it;
    }
}

}  // namespace

ObjectGraph add_object(ObjectGraph graph, const ObjectNode& node, const PredicateParams& params) {
    if (graph.contains(node.id)) throw Error(Err::DuplicateObject, node.id);
    if (node.half_extents.x <= 0 || node.half_extents.y <= 0 || node.half_extents.z <= 0)
        throw Error(Err::MalformedDelta, "non-positive extents for " + node.id);
    if (!node.pose.is_orthonormal(1e-7))
        throw Error(Err::InvalidTransform, "pose not a rotation for " + node.id);
    ObjectNode stored = node;
    stored.pose = quantize_transform(stored.pose.orthonormalized());
    stored.half_extents = quantize_vec3(stored.half_extents);
    for (const auto& [oid, other] : graph.nodes) {
        eval_pair_into(graph.edges, stored, other, params);
        eval_pair_into(graph.edges, other, stored, params);
    }
    graph.nodes.emplace(stored.id, std::move(stored));
    return graph;
}

ObjectGraph remove_object(ObjectGraph graph, const std::string& id) {
    if (!graph.contains(id)) throw Error(Err::UnknownObject, id);
    graph.nodes.erase(id);
    drop_incident(graph.edges, id);
    return graph;
}

ObjectGraph move_object(ObjectGraph graph, const std::string& id, const RigidTransform& delta,
                        const PredicateParams& params) {
    auto it = graph.nodes.find(id);
    if (it == graph.nodes.end()) throw Error(Err::UnknownObject, id);
    if (!delta.is_orthonormal(1e-7))
        throw Error(Err::InvalidTransform, "move delta not rigid for " + id);
    ObjectNode& node = it->second;
    node.pose = quantize_transform(delta.compose(node.pose).orthonormalized());
    drop_incident(graph.edges, id);
    for (const auto& [oid, other] : graph.nodes) {
        if (oid == id) continue;
        eval_pair_into(graph.edges, node, other, params);
        eval_pair_into(graph.edges, other, node, params);
    }
    return graph;
}

std::set<RelationEdge> relation_closure(const std::map<std::string, ObjectNode>& nodes,
                                        const PredicateParams& params) {
    std::set<RelationEdge> edges;
    for (const auto& [ida, a] : nodes) {
        for (const auto& [idb, b] : nodes) {
            if (ida == idb) continue;
            eval_pair_into(edges, a, b, params);
        }
    }
    return edges;
}

const SceneNode& SceneTree::at(const std::string& id) const {
    auto it = nodes.find(id);
    if (it == nodes.end()) throw Error(Err::UnknownNode, id);
    return it->second;
}

SceneNode& SceneTree::at(const std::string& id) {
    auto it = nodes.find(id);
    if (it == nodes.end()) throw Error(Err::UnknownNode, id);
    return it->second;
}

std::optional<std::string> SceneTree::carrier_of(const std::string& object_id) const {
    for (const auto& [id, node] : nodes) {
        if (node.kind == NodeKind::Carrier && node.graph.contains(object_id)) return id;
    }
    return std::nullopt;
}

std::vector<std::string> SceneTree::carriers() const {
    std::vector<std::string> out;
    for (const auto& [id, node] : nodes)
        if (node.kind == NodeKind::Carrier) out.push_back(id);
    return out;
}

std::size_t SceneTree::node_count() const {
    std::size_t count = nodes.size();
    for (const auto& [id, node] : nodes) count += node.graph.nodes.size();
    return count;
}

SceneTree build_scene_tree(const WorldSpec& world) {
    SceneTree tree;
    tree.params = world.params;
    tree.storage_priors = world.storage_priors;
    tree.root = "scene";

    SceneNode root;
    root.id = tree.root;
    root.kind = NodeKind::Root;
    root.name = world.domain;
    root.media = {"maps/" + world.domain + "/top_down", "maps/" + world.domain + "/occupancy"};
    tree.nodes.emplace(root.id, root);

    for (const auto& spec : world.regions) {
        if (tree.contains(spec.id)) throw Error(Err::DuplicateId, spec.id);
        SceneNode node;
        node.id = spec.id;
        node.kind = NodeKind::Region;
        node.name = spec.name.empty() ? spec.id : spec.name;
        node.position = spec.position;
        node.media = spec.media;
        node.parent = tree.root;
        tree.nodes.emplace(node.id, node);
        tree.at(tree.root).children.push_back(node.id);
    }
    for (const auto& spec : world.carriers) {
        if (tree.contains(spec.id)) throw Error(Err::DuplicateId, spec.id);
        if (!tree.contains(spec.region) || tree.at(spec.region).kind != NodeKind::Region)
            throw Error(Err::OrphanCarrier, spec.id + " -> " + spec.region);
        SceneNode node;
        node.id = spec.id;
        node.kind = NodeKind::Carrier;
        node.name = spec.name.empty() ? spec.id : spec.name;
        node.position = spec.position;
        node.affordances = spec.affordances;
        node.state = spec.state;
        node.parent = spec.region;
        tree.nodes.emplace(node.id, node);
        tree.at(spec.region).children.push_back(node.id);
    }
    for (const auto& spec : world.objects) {
        if (!tree.contains(spec.carrier) || tree.at(spec.carrier).kind != NodeKind::Carrier)
            throw Error(Err::OrphanCarrier, spec.id + " -> " + spec.carrier);
        ObjectNode node;
        node.id = spec.id;
        node.category = spec.category;
        node.half_extents = spec.half_extents;
        node.pose = spec.pose;
        node.state = spec.state;
        node.affordances = spec.affordances;
        SceneNode& carrier = tree.at(spec.carrier);
        carrier.graph = add_object(std::move(carrier.graph), node, tree.params);
    }
    return tree;
}

std::vector<SceneNode> query_nearby(const SceneTree& tree, const std::string& location, int hops) {
    if (!tree.contains(location)) throw Error(Err::UnknownNode, location);
    std::map<std::string, int> dist;
    std::deque<std::string> frontier{location};
    dist[location] = 0;
    while (!frontier.empty()) {
        std::string cur = frontier.front();
        frontier.pop_front();
        int d = dist[cur];
        if (d >= hops) continue;
        const SceneNode& node = tree.at(cur);
        std::vector<std::string> adjacent = node.children;
        if (!node.parent.empty()) adjacent.push_back(node.parent);
        for (const auto& next : adjacent) {
            if (dist.count(next)) continue;
            dist[next] = d + 1;
            frontier.push_back(next);
        }
    }
    std::vector<SceneNode> out;
    for (const auto& [id, d] : dist) out.push_back(tree.at(id));  // map order == id order
    return out;
}

std::vector<std::string> locate_candidates(const SceneTree& tree, const std::string& category) {
    std::vector<std::string> holders;
    std::set<std::string> seen;
    for (const auto& [id, node] : tree.nodes) {
        if (node.kind != NodeKind::Carrier) continue;
        for (const auto& [oid, obj] : node.graph.nodes) {
            if (obj.category == category) {
                holders.push_back(id);
                seen.insert(id);
                break;
            }
        }
    }
    auto it = tree.storage_priors.find(category);
    if (it != tree.storage_priors.end()) {
        std::vector<std::string> priors = it->second;
        std::sort(priors.begin(), priors.end());
        for (const auto& id : priors) {
            if (tree.contains(id) && !seen.count(id)) {
                holders.push_back(id);
                seen.insert(id);
            }
        }
    }
    return holders;
}

int tree_hop_distance(const SceneTree& tree, const std::string& a, const std::string& b) {
    if (!tree.contains(a)) throw Error(Err::UnknownNode, a);
    if (!tree.contains(b)) throw Error(Err::UnknownNode, b);
    if (a == b) return 0;
    std::map<std::string, int> dist;
    std::deque<std::string> frontier{a};
    dist[a] = 0;
    while (!frontier.empty()) {
        std::string cur = frontier.front();
        frontier.pop_front();
        const SceneNode& node = tree.at(cur);
        std::vector<std::string> adjacent = node.children;
        if (!node.parent.empty()) adjacent.push_back(node.parent);
        for (const auto& next : adjacent) {
            if (dist.count(next)) continue;
            dist[next] = dist[cur] + 1;
            if (next == b) return dist[next];
            frontier.push_back(next);
        }
    }
    return std::numeric_limits<int>::max();
}

// ---- json ----

canon::json vec2_to_json(const Vec2& v) { return canon::json::array({v.x, v.y}); }

Vec2 vec2_from_json(const canon::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

canon::json vec3_to_json(const Vec3& v) { return canon::json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const canon::json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

canon::json transform_to_json(const RigidTransform& t) {
    canon::json rot = canon::json::array();
    for (double v : t.r) rot.push_back(v);
    return canon::json{{"r", rot}, {"t", vec3_to_json(t.t)}};
}

RigidTransform transform_from_json(const canon::json& j) {
    RigidTransform out;
    const auto& rot = j.at("r");
    for (int i = 0; i < 9; ++i) out.r[i] = rot.at(i).get<double>();
    out.t = vec3_from_json(j.at("t"));
    return out;
}

void to_json(canon::json& j, const PredicateParams& p) {
    j = canon::json{{"near_radius", p.near_radius},
                    {"on_z_tol", p.on_z_tol},
                    {"on_overlap_min", p.on_overlap_min},
                    {"in_shrink", p.in_shrink},
                    {"dir_margin", p.dir_margin}};
}

void from_json(const canon::json& j, PredicateParams& p) {
    p.near_radius = j.value("near_radius", p.near_radius);
    p.on_z_tol = j.value("on_z_tol", p.on_z_tol);
    p.on_overlap_min = j.value("on_overlap_min", p.on_overlap_min);
    p.in_shrink = j.value("in_shrink", p.in_shrink);
    p.dir_margin = j.value("dir_margin", p.dir_margin);
}

void to_json(canon::json& j, const ObjectNode& n) {
    j = canon::json{{"id", n.id},
                    {"category", n.category},
                    {"extents", vec3_to_json(n.half_extents)},
                    {"affordances", n.affordances},
                    {"state", n.state},
                    {"pose", transform_to_json(n.pose)}};
}

void from_json(const canon::json& j, ObjectNode& n) {
    n.id = j.at("id").get<std::string>();
    n.category = j.at("category").get<std::string>();
    n.half_extents = vec3_from_json(j.at("extents"));
    n.affordances = j.value("affordances", std::vector<std::string>{});
    n.state = j.value("state", std::map<std::string, std::string>{});
    n.pose = transform_from_json(j.at("pose"));
}

void to_json(canon::json& j, const SceneNode& n) {
    canon::json objects = canon::json::array();
    for (const auto& [id, obj] : n.graph.nodes) objects.push_back(obj);
    j = canon::json{{"id", n.id},
                    {"kind", to_string(n.kind)},
                    {"name", n.name},
                    {"position", vec2_to_json(n.position)},
                    {"media", n.media},
                    {"affordances", n.affordances},
                    {"state", n.state},
                    {"parent", n.parent},
                    {"children", n.children},
                    {"objects", objects}};
}

void from_json(const canon::json& j, SceneNode& n) {
    n.id = j.at("id").get<std::string>();
    n.kind = node_kind_from_string(j.at("kind").get<std::string>());
    n.name = j.value("name", std::string{});
    n.position = vec2_from_json(j.at("position"));
    n.media = j.value("media", std::vector<std::string>{});
    n.affordances = j.value("affordances", std::vector<std::string>{});
    n.state = j.value("state", std::map<std::string, std::string>{});
    n.parent = j.value("parent", std::string{});
    n.children = j.value("children", std::vector<std::string>{});
    n.graph = ObjectGraph{};
    if (j.contains("objects")) {
        for (const auto& item : j.at("objects")) {
            ObjectNode obj = item.get<ObjectNode>();
            n.graph.nodes.emplace(obj.id, std::move(obj));
        }
    }
}

void to_json(canon::json& j, const SceneTree& t) {
    canon::json nodes = canon::json::array();
    for (const auto& [id, node] : t.nodes) nodes.push_back(node);
    j = canon::json{{"root", t.root},
                    {"nodes", nodes},
                    {"priors", t.storage_priors},
                    {"params", t.params}};
}

void from_json(const canon::json& j, SceneTree& t) {
    t = SceneTree{};
    t.root = j.at("root").get<std::string>();
    t.storage_priors =
        j.value("priors", std::map<std::string, std::vector<std::string>>{});
    if (j.contains("params")) t.params = j.at("params").get<PredicateParams>();
    for (const auto& item : j.at("nodes")) {
        SceneNode node = item.get<SceneNode>();
        // Edges are not persisted; rebuild the closure.
        node.graph.edges = relation_closure(node.graph.nodes, t.params);
        t.nodes.emplace(node.id, std::move(node));
    }
}

void to_json(canon::json& j, const WorldSpec& w) {
    canon::json regions = canon::json::array();
    for (const auto& r : w.regions)
        regions.push_back(canon::json{{"id", r.id},
                                      {"name", r.name},
                                      {"position", vec2_to_json(r.position)},
                                      {"media", r.media}});
    canon::json carriers = canon::json::array();
    for (const auto& c : w.carriers)
        carriers.push_back(canon::json{{"id", c.id},
                                       {"region", c.region},
                                       {"name", c.name},
                                       {"position", vec2_to_json(c.position)},
                                       {"affordances", c.affordances},
                                       {"state", c.state}});
    canon::json objects = canon::json::array();
    for (const auto& o : w.objects)
        objects.push_back(canon::json{{"id", o.id},
                                      {"carrier", o.carrier},
                                      {"category", o.category},
                                      {"extents", vec3_to_json(o.half_extents)},
                                      {"pose", transform_to_json(o.pose)},
                                      {"state", o.state},
                                      {"affordances", o.affordances}});
    j = canon::json{{"domain", w.domain}, {"level", w.level},   {"seed", w.seed},
                    {"regions", regions}, {"carriers", carriers}, {"objects", objects},
                    {"priors", w.storage_priors}, {"params", w.params}};
}

void from_json(const canon::json& j, WorldSpec& w) {
    w = WorldSpec{};
    w.domain = j.value("domain", std::string{"HOUSEHOLD"});
    w.level = j.value("level", std::string{"L1"});
    w.seed = j.value("seed", std::uint64_t{0});
    for (const auto& item : j.value("regions", canon::json::array())) {
        RegionSpec r;
        r.id = item.at("id").get<std::string>();
        r.name = item.value("name", std::string{});
        r.position = vec2_from_json(item.at("position"));
        r.media = item.value("media", std::vector<std::string>{});
        w.regions.push_back(std::move(r));
    }
    for (const auto& item : j.value("carriers", canon::json::array())) {
        CarrierSpec c;
        c.id = item.at("id").get<std::string>();
        c.region = item.at("region").get<std::string>();
        c.name = item.value("name", std::string{});
        c.position = vec2_from_json(item.at("position"));
        c.affordances = item.value("affordances", std::vector<std::string>{});
        c.state = item.value("state", std::map<std::string, std::string>{});
        w.carriers.push_back(std::move(c));
    }
    for (const auto& item : j.value("objects", canon::json::array())) {
        ObjectSpec o;
        o.id = item.at("id").get<std::string>();
        o.carrier = item.at("carrier").get<std::string>();
        o.category = item.at("category").get<std::string>();
        o.half_extents = vec3_from_json(item.at("extents"));
        o.pose = transform_from_json(item.at("pose"));
        o.state = item.value("state", std::map<std::string, std::string>{});
        o.affordances = item.value("affordances", std::vector<std::string>{});
        w.objects.push_back(std::move(o));
    }
    w.storage_priors = j.value("priors", std::map<std::string, std::vector<std::string>>{});
    if (j.contains("params")) w.params = j.at("params").get<PredicateParams>();
}

}  // namespace fleetmind::scene
