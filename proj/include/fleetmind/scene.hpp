#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fleetmind/canonical.hpp"
#include "fleetmind/transform.hpp"

namespace fleetmind::scene {

enum class NodeKind { Root, Region, Carrier };

enum class Relation { On, In, Left, Right, Front, Back, Near };

inline constexpr Relation kAllRelations[] = {Relation::On,    Relation::In,   Relation::Left,
                                             Relation::Right, Relation::Front, Relation::Back,
                                             Relation::Near};

const char* to_string(Relation rel);
Relation relation_from_string(const std::string& name);
const char* to_string(NodeKind kind);
NodeKind node_kind_from_string(const std::string& name);

/// Geometry thresholds for the relation predicates. Defaults are declared
/// here and overridable through world/scenario config.
struct PredicateParams {
    double near_radius = 0.3;      // center distance for NEAR (m)
    double on_z_tol = 0.02;        // bottom-to-top face gap for ON (m)
    double on_overlap_min = 0.25;  // min footprint overlap fraction for ON
    double in_shrink = 0.01;       // container box shrink for IN (m)
    double dir_margin = 0.05;      // dominance margin for LEFT/RIGHT/FRONT/BACK (m)
};

/// Object on a carrier: intrinsic attributes, dynamic state, and a pose in
/// the carrier's local frame. Extents are axis-aligned half sizes in the
/// object frame.
struct ObjectNode {
    std::string id;
    std::string category;
    Vec3 half_extents{0.05, 0.05, 0.05};
    std::vector<std::string> affordances;
    std::map<std::string, std::string> state;
    RigidTransform pose;
};

struct RelationEdge {
    std::string subject;
    Relation rel;
    std::string object;

    auto operator<=>(const RelationEdge&) const = default;
};

struct ObjectGraph {
    std::map<std::string, ObjectNode> nodes;
    std::set<RelationEdge> edges;

    bool contains(const std::string& id) const { return nodes.count(id) > 0; }
};

struct Aabb {
    Vec3 lo, hi;
};

/// Axis-aligned bounds of an oriented box in the enclosing frame.
Aabb box_aabb(const RigidTransform& pose, const Vec3& half_extents);

/// State doubles are kept at canonical-text precision so that snapshot and
/// restore are lossless and replayed folds stay byte-identical.
Vec2 quantize_vec2(const Vec2& v);
Vec3 quantize_vec3(const Vec3& v);
RigidTransform quantize_transform(const RigidTransform& t);

/// Pure predicate: does `rel` hold from a to b? Both poses must live in one
/// common frame.
bool eval_relation(Relation rel, const RigidTransform& pose_a, const Vec3& ext_a,
                   const RigidTransform& pose_b, const Vec3& ext_b, const PredicateParams& params);
bool eval_relation(Relation rel, const ObjectNode& a, const ObjectNode& b,
                   const PredicateParams& params);

/// Edit primitives. Value-in, value-out; incident edges are re-evaluated,
/// everything else is untouched.
ObjectGraph add_object(ObjectGraph graph, const ObjectNode& node, const PredicateParams& params);
ObjectGraph remove_object(ObjectGraph graph, const std::string& id);
ObjectGraph move_object(ObjectGraph graph, const std::string& id, const RigidTransform& delta,
                        const PredicateParams& params);

/// Full closure over all ordered pairs (used when building from scratch).
std::set<RelationEdge> relation_closure(const std::map<std::string, ObjectNode>& nodes,
                                        const PredicateParams& params);

struct SceneNode {
    std::string id;
    NodeKind kind = NodeKind::Carrier;
    std::string name;
    Vec2 position;                          // map frame, meters
    std::vector<std::string> media;         // opaque view handles
    std::vector<std::string> affordances;   // carrier tags, e.g. "closable"
    std::map<std::string, std::string> state;
    std::string parent;
    std::vector<std::string> children;
    ObjectGraph graph;                      // carriers only
};

struct SceneTree {
    std::map<std::string, SceneNode> nodes;
    std::string root;
    std::map<std::string, std::vector<std::string>> storage_priors;  // category -> carriers
    PredicateParams params;

    bool contains(const std::string& id) const { return nodes.count(id) > 0; }
    const SceneNode& at(const std::string& id) const;
    SceneNode& at(const std::string& id);

    /// Carrier currently holding an object id, if any.
    std::optional<std::string> carrier_of(const std::string& object_id) const;
    /// Carrier ids in id order.
    std::vector<std::string> carriers() const;
    std::size_t node_count() const;  // tree nodes + graph nodes
};

// ---- world specification (scenario-provided geometry) ----

struct RegionSpec {
    std::string id;
    std::string name;
    Vec2 position;
    std::vector<std::string> media;
};

struct CarrierSpec {
    std::string id;
    std::string region;
    std::string name;
    Vec2 position;
    std::vector<std::string> affordances;
    std::map<std::string, std::string> state;
};

struct ObjectSpec {
    std::string id;
    std::string carrier;
    std::string category;
    Vec3 half_extents{0.05, 0.05, 0.05};
    RigidTransform pose;
    std::map<std::string, std::string> state;
    std::vector<std::string> affordances;
};

struct WorldSpec {
    std::string domain = "HOUSEHOLD";
    std::string level = "L1";
    std::uint64_t seed = 0;
    std::vector<RegionSpec> regions;
    std::vector<CarrierSpec> carriers;
    std::vector<ObjectSpec> objects;
    std::map<std::string, std::vector<std::string>> storage_priors;
    PredicateParams params;

    std::size_t node_count() const {
        return 1 + regions.size() + carriers.size() + objects.size();
    }
};

/// Instantiates the tree and populates every carrier graph (closure edges
/// included). Throws DuplicateId / OrphanCarrier.
SceneTree build_scene_tree(const WorldSpec& world);

/// Nodes within `hops` tree edges of `location`, in id order. Carrier
/// entries carry their object graphs.
std::vector<SceneNode> query_nearby(const SceneTree& tree, const std::string& location, int hops);

/// Carriers ranked for a category: holders first, declared storage second,
/// id order within each group.
std::vector<std::string> locate_candidates(const SceneTree& tree, const std::string& category);

/// BFS hop count between two tree nodes. Throws UnknownNode.
int tree_hop_distance(const SceneTree& tree, const std::string& a, const std::string& b);

// json round-trips
void to_json(canon::json& j, const ObjectNode& n);
void from_json(const canon::json& j, ObjectNode& n);
void to_json(canon::json& j, const SceneNode& n);
void from_json(const canon::json& j, SceneNode& n);
void to_json(canon::json& j, const SceneTree& t);
void from_json(const canon::json& j, SceneTree& t);
void to_json(canon::json& j, const WorldSpec& w);
void from_json(const canon::json& j, WorldSpec& w);
void to_json(canon::json& j, const PredicateParams& p);
void from_json(const canon::json& j, PredicateParams& p);

canon::json transform_to_json(const RigidTransform& t);
RigidTransform transform_from_json(const canon::json& j);
canon::json vec2_to_json(const Vec2& v);
Vec2 vec2_from_json(const canon::json& j);
canon::json vec3_to_json(const Vec3& v);
Vec3 vec3_from_json(const canon::json& j);

}  // namespace fleetmind::scene
