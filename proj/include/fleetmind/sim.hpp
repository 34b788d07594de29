#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fleetmind/metrics.hpp"
#include "fleetmind/orchestrator.hpp"
#include "fleetmind/outcome.hpp"
#include "fleetmind/rng.hpp"

namespace fleetmind::sim {

/// Deterministic world generation by difficulty band. Node totals:
/// L1 < 20, L2 in [20,30], L3 in [40,50].
scene::WorldSpec generate_world(const std::string& domain, const std::string& level,
                                std::uint64_t seed);

struct RobotSpec {
    std::string id;
    std::string region;
    std::vector<std::string> capabilities;
    double battery = 100.0;
};

struct SimConfig {
    std::uint64_t seed = 1;
    bool memory = true;      // off: memory-less baseline arm
    std::string ablate;      // "", "spatial", "temporal", "embodiment"
    double drift_per_tick = 0.0;
    int preshuffle = 0;      // unobserved moves applied before the run
    int task_budget = 120;
    int subtask_budget = 40;
    int retry_budget = 2;
    int replan_budget = 2;
    std::int64_t heartbeat_period = robots::kDefaultHeartbeatPeriod;
    std::int64_t offline_threshold = robots::kDefaultOfflineThreshold;
    std::int64_t max_ticks = 5000;
    bool chain_tasks = true;  // lifelong sequences; false: submit by arrival

    bool use_spatial() const { return memory && ablate != "spatial"; }
    bool use_temporal() const { return memory && ablate != "temporal"; }
    bool use_embodiment() const { return ablate != "embodiment"; }
};

struct Scenario {
    scene::WorldSpec world;
    std::vector<RobotSpec> robots;
    std::vector<plan::GlobalTask> tasks;
    std::vector<FaultPlan> faults;
    SimConfig config;
};

Scenario scenario_from_json(const canon::json& j);
canon::json scenario_to_json(const Scenario& s);

/// Ground-truth environment: carrier graphs plus per-robot grippers. Tool
/// outcomes mutate the truth and return the deltas that reconcile shared
/// memory with what the robot observed.
class SimWorld : public ToolBackend {
public:
    SimWorld(const scene::WorldSpec& world, const SimConfig& config, const mem::Kernel* kernel);

    ToolOutcome invoke(const std::string& robot, const std::string& tool,
                       const std::map<std::string, std::string>& args) override;
    bool responsive(const std::string& robot) const override;

    void add_fault(const FaultPlan& plan);
    /// Fires due faults and exogenous drift; call once per tick before the
    /// scheduler.
    void on_tick(std::int64_t tick, std::vector<canon::json>* trace);
    void preshuffle(int moves);

    bool e3_armed() const { return e3_rounds_ > 0; }
    void consume_e3_round() { if (e3_rounds_ > 0) --e3_rounds_; }

    const scene::SceneTree& truth() const { return truth_; }
    /// Every object is on exactly one carrier or in exactly one gripper.
    bool conservation_ok() const;
    std::size_t object_count() const;

private:
    const scene::SceneNode* robot_carrier(const std::string& robot) const;
    std::vector<mem::SpatialDelta> reconcile_carrier(const std::string& carrier) const;
    ToolOutcome fail(const std::string& kind, const std::string& feedback) const;
    bool drift_once();

    scene::SceneTree truth_;
    const mem::Kernel* kernel_;
    SimConfig config_;
    std::map<std::string, std::optional<scene::ObjectNode>> gripper_;
    std::set<std::pair<std::string, std::string>> broken_;      // (robot, tool)
    std::map<std::string, std::int64_t> suppressed_until_;      // E1
    std::vector<FaultPlan> pending_faults_;
    int e3_rounds_ = 0;
    std::int64_t now_ = 0;
    Rng drift_rng_;
    int placement_counter_ = 0;
};

/// One deterministic run: builds the kernel from the world scan, registers
/// robots, then ticks faults -> heartbeats -> scheduler until every task is
/// terminal.
class Simulation {
public:
    explicit Simulation(Scenario scenario);

    metrics::RunReport run();

    const std::vector<canon::json>& trace() const { return trace_; }
    std::string trace_text() const;
    const mem::Kernel& kernel() const { return *kernel_; }
    const SimWorld& world() const { return *world_; }
    const std::string& base_snapshot() const { return base_snapshot_; }
    const orch::Orchestrator& orchestrator() const { return *orch_; }

private:
    void heartbeat_phase(std::int64_t tick);
    void submit_phase(std::int64_t tick);

    Scenario scenario_;
    std::unique_ptr<mem::Kernel> kernel_;
    std::unique_ptr<SimWorld> world_;
    std::unique_ptr<orch::Orchestrator> orch_;
    std::vector<canon::json> trace_;
    std::string base_snapshot_;
    std::size_t next_task_ = 0;
};

// Scripted scenario shapes used by the experiment suites.

struct LifelongParams {
    std::string domain = "HOUSEHOLD";
    std::string level = "L1";
    int sq = 1;
    std::uint64_t seed = 1;
    bool memory_on = true;
    double hide_prob = 0.6;   // store tasks choose a closable destination
    double drift = 0.02;
    int task_budget = 120;
};
Scenario make_lifelong_scenario(const LifelongParams& p);

struct ScalabilityParams {
    std::string domain = "RESTAURANT";
    std::string level = "L2";
    int team = 1;
    std::uint64_t seed = 1;
    int tasks = 6;
    int items_per_task = 2;
    double drift = 0.08;
};
Scenario make_scalability_scenario(const ScalabilityParams& p);

struct RobustnessParams {
    std::string domain = "HOUSEHOLD";
    std::string level = "L1";
    FaultMode mode = FaultMode::None;
    std::uint64_t seed = 1;
    bool memory_on = true;
    double hide_prob = 0.25;
    std::int64_t e1_trigger = 8;
};
Scenario make_robustness_scenario(const RobustnessParams& p);

struct AblationParams {
    std::string domain = "HOUSEHOLD";
    std::string level = "L1";
    std::string ablate;  // "", "spatial", "temporal", "embodiment"
    std::uint64_t seed = 1;
    double hide_prob = 0.3;
    int preshuffle = 2;
};
Scenario make_ablation_scenario(const AblationParams& p);

}  // namespace fleetmind::sim
