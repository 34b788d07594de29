#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "fleetmind/errors.hpp"
#include "fleetmind/geo.hpp"
#include "fleetmind/suites.hpp"

namespace fm = fleetmind;

namespace {

std::vector<fm::canon::json> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw fm::Error(fm::Err::CorruptScenario, "cannot open " + path);
    std::vector<fm::canon::json> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        lines.push_back(fm::canon::parse(line));
    }
    return lines;
}

void print_transform(const fm::RigidTransform& t) {
    std::printf("rotation:\n");
    for (int i = 0; i < 3; ++i)
        std::printf("  %12.9f %12.9f %12.9f\n", t.r[i * 3], t.r[i * 3 + 1], t.r[i * 3 + 2]);
    std::printf("translation: %12.9f %12.9f %12.9f\n", t.t.x, t.t.y, t.t.z);
}

int cmd_run(const std::string& scenario_path, std::uint64_t seed, bool seed_set,
            const std::string& memory, const std::string& ablate, const std::string& fault,
            int sq, const std::string& level, int trials, const std::string& out) {
    fm::canon::json doc = fm::canon::parse(fm::canon::read_file(scenario_path));
    fm::sim::Scenario base = fm::sim::scenario_from_json(doc);
    if (seed_set) base.config.seed = seed;
    if (memory == "on") base.config.memory = true;
    if (memory == "off") base.config.memory = false;
    if (!ablate.empty()) base.config.ablate = ablate;
    if (!level.empty()) {
        base.world = fm::sim::generate_world(base.world.domain, level, base.world.seed);
    }
    if (sq > 0) {
        fm::sim::LifelongParams p;
        p.domain = base.world.domain;
        p.level = base.world.level;
        p.sq = sq;
        p.seed = base.config.seed;
        p.memory_on = base.config.memory;
        fm::sim::Scenario shaped = fm::sim::make_lifelong_scenario(p);
        shaped.config = base.config;
        base = shaped;
    }
    if (!fault.empty()) {
        base.faults.clear();
        fm::sim::FaultMode mode = fm::sim::fault_mode_from_string(fault);
        if (mode != fm::sim::FaultMode::None) {
            fm::sim::FaultPlan plan;
            plan.mode = mode;
            plan.robot = base.robots.empty() ? "r1" : base.robots.front().id;
            plan.tool = "pick";
            plan.trigger_tick = mode == fm::sim::FaultMode::E1Offline ? 8 : 0;
            plan.rounds = 2;
            base.faults.push_back(plan);
        }
    }

    std::vector<fm::metrics::RunReport> reports;
    std::string last_trace;
    for (int t = 0; t < std::max(1, trials); ++t) {
        fm::sim::Scenario scenario = base;
        scenario.config.seed = fm::Rng::mix(base.config.seed + 1000003ULL * t);
        if (t == 0) scenario.config.seed = base.config.seed;
        fm::sim::Simulation simulation(scenario);
        reports.push_back(simulation.run());
        last_trace = simulation.trace_text();
    }

    fm::metrics::MetricsReport report = fm::metrics::compute_metrics(reports);
    std::cout << fm::metrics::render_cells(report);
    auto histogram = fm::metrics::classify_failures(reports);
    if (!histogram.empty()) {
        std::cout << "failures by stage:\n";
        for (const auto& [stage, count] : histogram)
            std::cout << "  " << stage << ": " << count << "\n";
    }
    if (!out.empty()) {
        fm::canon::json out_doc{{"metrics", report}, {"reports", reports}};
        fm::canon::write_file(out, fm::canon::dump(out_doc));
        fm::canon::write_file(out + ".trace.jsonl", last_trace);
        std::cout << "wrote " << out << " and " << out << ".trace.jsonl\n";
    }
    return 0;
}

int cmd_suite(const std::string& name, const std::string& config_path, int trials,
              std::uint64_t seed, bool seed_set, const std::string& out) {
    fm::metrics::SuiteConfig config;
    if (!config_path.empty())
        config = fm::metrics::suite_config_from_json(
            fm::canon::parse(fm::canon::read_file(config_path)));
    if (trials > 0) config.trials = trials;
    if (seed_set) config.seed = seed;

    auto result = fm::metrics::run_suite(fm::metrics::suite_kind_from_string(name), config);
    std::cout << result.table;
    if (!out.empty()) {
        fm::canon::write_file(out, fm::canon::dump(result.records));
        std::cout << "wrote " << out << "\n";
    }
    return 0;
}

int cmd_metrics(const std::vector<std::string>& traces) {
    std::vector<fm::metrics::RunReport> reports;
    for (const auto& path : traces)
        reports.push_back(fm::metrics::report_from_trace(read_jsonl(path)));
    fm::metrics::MetricsReport report = fm::metrics::compute_metrics(reports);
    std::cout << fm::metrics::render_cells(report);
    auto histogram = fm::metrics::classify_failures(reports);
    for (const auto& [stage, count] : histogram)
        std::cout << "  " << stage << ": " << count << "\n";
    return 0;
}

int cmd_align(const std::string& path) {
    fm::canon::json doc = fm::canon::parse(fm::canon::read_file(path));
    std::string kind = doc.value("kind", std::string{"rigid3d3d"});
    if (kind == "rigid3d3d") {
        std::vector<std::pair<fm::Vec3, fm::Vec3>> pairs;
        for (const auto& item : doc.at("pairs"))
            pairs.push_back({fm::scene::vec3_from_json(item.at(0)),
                             fm::scene::vec3_from_json(item.at(1))});
        auto result = fm::geo::solve_rigid_3d3d(pairs);
        print_transform(result.transform);
        std::printf("rms: %.9g m\n", result.rms);
        return 0;
    }
    if (kind == "map") {
        std::vector<fm::Vec3> points;
        std::vector<fm::Vec2> targets;
        for (const auto& item : doc.at("pairs")) {
            points.push_back(fm::scene::vec3_from_json(item.at(0)));
            targets.push_back(fm::scene::vec2_from_json(item.at(1)));
        }
        fm::geo::MapProjection proj;
        if (doc.contains("projection")) {
            proj.scale = doc["projection"].value("scale", 1.0);
            if (doc["projection"].contains("offset"))
                proj.offset = fm::scene::vec2_from_json(doc["projection"]["offset"]);
        }
        auto result = fm::geo::solve_map_alignment(points, targets, proj, fm::RigidTransform{});
        print_transform(result.transform);
        std::printf("cost: %.9g  iterations: %d  z_unobservable: %s\n", result.cost,
                    result.iterations, result.z_unobservable ? "yes" : "no");
        return 0;
    }
    if (kind == "pnp") {
        std::vector<fm::geo::Correspondence3D2D> pairs;
        for (const auto& item : doc.at("pairs"))
            pairs.push_back({fm::scene::vec3_from_json(item.at(0)),
                             fm::scene::vec2_from_json(item.at(1))});
        fm::geo::CameraIntrinsics K;
        if (doc.contains("intrinsics")) {
            K.fx = doc["intrinsics"].value("fx", K.fx);
            K.fy = doc["intrinsics"].value("fy", K.fy);
            K.cx = doc["intrinsics"].value("cx", K.cx);
            K.cy = doc["intrinsics"].value("cy", K.cy);
        }
        fm::RigidTransform init;
        if (doc.contains("init")) init = fm::scene::transform_from_json(doc["init"]);
        auto result = fm::geo::solve_pnp(pairs, K, init);
        print_transform(result.pose);
        std::printf("reprojection rms: %.9g px  iterations: %d\n", result.rms, result.iterations);
        return 0;
    }
    throw fm::Error(fm::Err::CorruptScenario, "unknown correspondence kind " + kind);
}

int cmd_replay(const std::string& log_path, const std::string& base_path,
               const std::string& expect_path) {
    auto events = fm::mem::read_event_log(log_path);
    fm::mem::MemoryState initial;
    if (!base_path.empty()) initial = fm::mem::restore(fm::canon::read_file(base_path));

    fm::mem::MemoryState first = fm::mem::reduce(initial, events);
    fm::mem::MemoryState second = fm::mem::reduce(initial, events);
    std::string snap1 = fm::mem::snapshot(first);
    std::string snap2 = fm::mem::snapshot(second);
    std::printf("events: %zu  final version: %lld\n", events.size(),
                static_cast<long long>(first.version));
    std::printf("fold determinism: %s\n", snap1 == snap2 ? "ok" : "MISMATCH");
    int rc = snap1 == snap2 ? 0 : 1;
    if (!expect_path.empty()) {
        std::string expect = fm::canon::read_file(expect_path);
        bool match = expect == snap1;
        std::printf("snapshot match: %s\n", match ? "ok" : "MISMATCH");
        if (!match) rc = 1;
    }
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-robot orchestration kernel and simulator"};
    app.require_subcommand(1);

    // run
    std::string scenario_path, memory, ablate, fault, level, out;
    std::uint64_t seed = 0;
    int sq = 0, trials = 1;
    auto* run = app.add_subcommand("run", "run a scenario");
    run->add_option("scenario", scenario_path, "scenario file")->required();
    auto* seed_opt = run->add_option("--seed", seed, "rng seed");
    run->add_option("--memory", memory, "on|off")->check(CLI::IsMember({"on", "off"}));
    run->add_option("--ablate", ablate, "spatial|temporal|embodiment")
        ->check(CLI::IsMember({"spatial", "temporal", "embodiment"}));
    run->add_option("--fault", fault, "none|e1|e2|e3")
        ->check(CLI::IsMember({"none", "e1", "e2", "e3"}));
    run->add_option("--sq", sq, "rebuild as a lifelong sequence of this length");
    run->add_option("--level", level, "l1|l2|l3")->check(CLI::IsMember({"l1", "l2", "l3"}));
    run->add_option("--trials", trials, "trial count");
    run->add_option("--out", out, "report path");

    // suite
    std::string suite_name, suite_config, suite_out;
    int suite_trials = 0;
    std::uint64_t suite_seed = 0;
    auto* suite = app.add_subcommand("suite", "run an experiment suite");
    suite->add_option("name", suite_name, "lifelong|scalability|robustness|ablation")->required();
    suite->add_option("config", suite_config, "suite config file");
    suite->add_option("--trials", suite_trials, "trials per cell");
    auto* suite_seed_opt = suite->add_option("--seed", suite_seed, "suite seed");
    suite->add_option("--out", suite_out, "records path");

    // metrics
    std::vector<std::string> trace_paths;
    auto* metrics_cmd = app.add_subcommand("metrics", "recompute metrics from run traces");
    metrics_cmd->add_option("traces", trace_paths, "trace jsonl files")->required();

    // align
    std::string corr_path;
    auto* align = app.add_subcommand("align", "solve an alignment from a correspondence file");
    align->add_option("file", corr_path, "correspondence file")->required();

    // replay
    std::string log_path, base_path, expect_path;
    auto* replay = app.add_subcommand("replay", "fold an event log and verify determinism");
    replay->add_option("log", log_path, "event log (jsonl)")->required();
    replay->add_option("--base", base_path, "base snapshot to fold from");
    replay->add_option("--expect", expect_path, "expected final snapshot");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run)
            return cmd_run(scenario_path, seed, seed_opt->count() > 0, memory, ablate, fault, sq,
                           level.empty() ? "" : "L" + level.substr(1), trials, out);
        if (*suite)
            return cmd_suite(suite_name, suite_config, suite_trials, suite_seed,
                             suite_seed_opt->count() > 0, suite_out);
        if (*metrics_cmd) return cmd_metrics(trace_paths);
        if (*align) return cmd_align(corr_path);
        if (*replay) return cmd_replay(log_path, base_path, expect_path);
    } catch (const fm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
