// fredsim: command-line front end for the fabric models, router and simulator.

#include "fred/fred.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace fred;

enum Exit { Ok = 0, ConfigError = 2, RoutingError = 3, SimulationError = 4 };

int exit_code(ErrorKind k)
{
    switch (k) {
    case ErrorKind::Routing: return RoutingError;
    case ErrorKind::Simulation: return SimulationError;
    default: return ConfigError;
    }
}

void write_text(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorKind::Config, "cannot write '" + path + "'");
    out << text;
}

std::vector<int> parse_ids(const std::string& s)
{
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) {
            try {
                out.push_back(std::stoi(tok));
            } catch (const std::exception&) {
                throw Error(ErrorKind::Config, "'" + tok + "' is not an integer id");
            }
        }
    return out;
}

std::optional<CollectiveMode> parse_mode(const std::string& s)
{
    if (s.empty())
        return std::nullopt;
    return mode_from_string(s, "--mode");
}

// ---------------------------------------------------------------------------

int cmd_describe(const std::string& platform, bool as_json)
{
    PlatformSpec p = load_platform(platform);
    Topology t = p.build();
    const CollectiveMode mode = effective_mode(p, std::nullopt);
    json j;
    j["platform"] = p.name;
    j["kind"] = p.kind == PlatformKind::Mesh ? "mesh" : "fabric";
    j["mode"] = to_string(mode);
    j["npus"] = t.npu_count;
    j["io_controllers"] = t.io_nodes.size();
    j["links"] = t.links.size();
    j["bisection_tbps"] = bisection_bandwidth(t) / TBps;
    j["io_rate_scale"] = io_rate_scale(t, p.kind == PlatformKind::Mesh ? p.io_bandwidth : p.fabric.io_bandwidth, mode);
    if (t.is_fabric()) {
        json sw = json::array();
        for (const auto& s : t.fabric().switches)
            sw.push_back({{"name", t.nodes[s.node].name},
                          {"level", s.level},
                          {"ports", s.sw.ports},
                          {"m", s.sw.m},
                          {"micro_switches", s.sw.micro_switch_count()},
                          {"npus", s.npus},
                          {"io", s.ios.size()}});
        j["switches"] = sw;
    } else {
        j["rows"] = t.mesh().rows;
        j["cols"] = t.mesh().cols;
    }
    if (as_json) {
        std::cout << j.dump(2) << '\n';
        return Ok;
    }
    std::printf("%s: %s, %d NPUs, %zu I/O controllers, %zu links\n", p.name.c_str(),
                p.kind == PlatformKind::Mesh ? "2D mesh" : "FRED fabric", t.npu_count, t.io_nodes.size(),
                t.links.size());
    std::printf("collectives: %s\nbisection: %.3f TBps\nio rate scale: %.4f\n", to_string(mode),
                bisection_bandwidth(t) / TBps, j["io_rate_scale"].get<double>());
    if (t.is_fabric())
        for (const auto& s : t.fabric().switches)
            std::printf("  %-6s level %d  FRED_%d(%d)  %zu micro-switches  %zu NPUs  %zu I/O\n",
                        t.nodes[s.node].name.c_str(), s.level, s.sw.m, s.sw.ports, s.sw.micro_switch_count(),
                        s.npus.size(), s.ios.size());
    return Ok;
}

int cmd_route(const std::string& file, int m_flag, int ports_flag, const std::string& dot, const std::string& strategy)
{
    const json j = read_json_file(file);
    const int m = m_flag > 0 ? m_flag : detail::get_or(j, "m", "epoch", 2);
    const int ports = ports_flag > 0 ? ports_flag : detail::get_as<int>(detail::field(j, "ports", "epoch"), "epoch.ports");
    const auto& arr = detail::field(j, "flows", "epoch");
    require(arr.is_array(), ErrorKind::Config, "epoch.flows: expected an array");
    std::vector<Flow> flows;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string fp = "epoch.flows[" + std::to_string(i) + "]";
        Flow f = make_flow(detail::get_or(arr[i], "id", fp, static_cast<int>(i)),
                           detail::get_as<std::vector<int>>(detail::field(arr[i], "inputs", fp), fp + ".inputs"),
                           detail::get_as<std::vector<int>>(detail::field(arr[i], "outputs", fp), fp + ".outputs"));
        flows.push_back(f);
    }
    FredSwitch sw = build_fred_switch(m, ports);
    flows = normalize_epoch(flows, ports);
    if (!dot.empty())
        write_text(dot, build_conflict_graph(flows, sw).to_dot("epoch"));
    RouteResult r = route(flows, sw);
    if (r.ok()) {
        std::printf("routed %zu flow(s) on %s\n%s", flows.size(), sw.name().c_str(),
                    describe_assignment(r.assignment()).c_str());
        return Ok;
    }
    const auto& c = r.conflict();
    std::printf("conflict on %s at depth %d: %s\n", sw.name().c_str(), c.depth, c.reason.c_str());
    if (strategy.empty())
        return RoutingError;
    ResolveStrategy rs;
    if (strategy == "block")
        rs = ResolveStrategy::Block;
    else if (strategy == "increase-m")
        rs = ResolveStrategy::IncreaseM;
    else if (strategy == "decompose")
        rs = ResolveStrategy::Decompose;
    else
        throw Error(ErrorKind::Config, "--resolve: expected block, increase-m or decompose");
    Resolution res = resolve(flows, sw, rs);
    if (auto* b = std::get_if<BlockResolution>(&res)) {
        std::printf("blocked into %zu epoch(s):\n", b->epochs.size());
        for (const auto& e : b->epochs) {
            std::printf(" ");
            for (const auto& f : e)
                std::printf(" %d", f.id);
            std::printf("\n");
        }
    } else if (auto* im = std::get_if<IncreaseMResolution>(&res)) {
        std::printf("routes with m = %d\n%s", im->m, describe_assignment(im->assignment).c_str());
    } else if (auto* d = std::get_if<DecomposeResolution>(&res)) {
        std::printf("decomposed %zu flow(s) into %zu unicast step(s); %zu kept in-network\n", d->decomposed.size(),
                    d->unicast_steps.size(), d->in_network.size());
    }
    return Ok;
}

int cmd_plan(const std::string& platform, const std::string& kind, const std::string& participants,
             const std::string& targets, std::uint64_t bytes, const std::string& mode_s, bool as_json)
{
    PlatformSpec p = load_platform(platform);
    Topology t = p.build();
    auto k = collective_from_string(kind);
    require(k.has_value(), ErrorKind::Config, "--collective: unknown collective '" + kind + "'");
    CollectivePattern pat;
    pat.kind = *k;
    pat.participants = participants.empty() ? std::vector<int>{} : parse_ids(participants);
    if (pat.participants.empty())
        for (int i = 0; i < t.npu_count; ++i)
            pat.participants.push_back(i);
    pat.targets = parse_ids(targets);
    pat.bytes = bytes;
    const CollectiveMode mode = effective_mode(p, parse_mode(mode_s));
    CollectivePlan plan = plan_collective(pat, t, mode);
    auto bw = effective_npu_bandwidth(plan, t);
    if (as_json) {
        json j;
        j["collective"] = to_string(plan.kind);
        j["mode"] = to_string(plan.mode);
        j["pipelined"] = plan.pipelined;
        j["steps"] = plan.steps.size();
        j["total_injected_bytes"] = total_injected(plan);
        j["completion_seconds"] = bw.time;
        j["effective_npu_gbps"] = bw.per_npu / GBps;
        json steps = json::array();
        for (const auto& s : plan.steps) {
            json tr = json::array();
            for (const auto& x : s.transfers)
                tr.push_back({{"sources", x.sources},
                              {"destinations", x.destinations},
                              {"offset", x.offset},
                              {"length", x.length}});
            steps.push_back(tr);
        }
        j["plan"] = steps;
        std::cout << j.dump(2) << '\n';
        return Ok;
    }
    std::printf("%s on %s (%s%s): %zu step(s)\n", to_string(plan.kind), p.name.c_str(), to_string(plan.mode),
                plan.pipelined ? ", pipelined" : "", plan.steps.size());
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        std::printf("step %zu:", i);
        for (const auto& x : plan.steps[i].transfers) {
            std::printf(" [");
            for (int s : x.sources)
                std::printf("%d ", s);
            std::printf("->");
            for (int d : x.destinations)
                std::printf(" %d", d);
            std::printf(" @%llu+%llu]", static_cast<unsigned long long>(x.offset),
                        static_cast<unsigned long long>(x.length));
        }
        std::printf("\n");
    }
    std::printf("injected bytes: %llu\ncompletion: %.6e s\neffective NPU bandwidth: %.1f GBps\n",
                static_cast<unsigned long long>(total_injected(plan)), bw.time, bw.per_npu / GBps);
    return Ok;
}

int cmd_place(const std::string& platform, const std::string& strategy)
{
    PlatformSpec p = load_platform(platform);
    Topology t = p.build();
    Placement pl = place(parse_strategy(strategy), t);
    const auto& s = pl.strategy;
    std::printf("%s on %s\nworker -> npu\n", s.name().c_str(), p.name.c_str());
    for (int i = 0; i < s.workers(); ++i)
        std::printf("  %s -> %d\n", worker_at(s, i).label().c_str(), pl.npu_of_worker[i]);
    if (!pl.idle.empty()) {
        std::printf("idle:");
        for (int n : pl.idle)
            std::printf(" %d", n);
        std::printf("\n");
    }
    if (!t.is_fabric())
        return Ok;
    PhaseReport rep = verify_conflict_free(pl, t);
    if (!rep.ok) {
        std::printf("conflict: %s\n", rep.message.c_str());
        return RoutingError;
    }
    std::printf("all MP/DP/PP phases route without conflicts\n");
    return Ok;
}

int cmd_run(ScenarioConfig cfg)
{
    SimReport r = run_scenario(cfg);
    const std::string csv = report_csv(r);
    if (!cfg.csv_path.empty())
        write_text(cfg.csv_path, csv);
    if (!cfg.json_path.empty())
        write_text(cfg.json_path, report_json(r).dump(2) + "\n");
    if (!cfg.trace_path.empty())
        write_text(cfg.trace_path, trace_csv(r));
    if (cfg.csv_path.empty() || cfg.csv_path != "-")
        std::cout << csv;
    return Ok;
}

int cmd_compare(const std::vector<std::string>& platforms, const std::string& workload, int iterations,
                const std::string& out)
{
    std::vector<PlatformSpec> ps;
    for (const auto& p : platforms)
        ps.push_back(load_platform(p));
    std::vector<std::string> workloads;
    if (workload == "all")
        workloads = workload_names();
    else
        workloads = {workload};
    std::string csv = comparison_csv_header();
    for (const auto& w : workloads)
        csv += comparison_csv_rows(run_comparison(ps, load_workload(w), iterations));
    write_text(out, csv);
    return Ok;
}

int cmd_analyze_load(const std::string& platform, const std::string& mesh, double io_gbps, const std::string& mode_s)
{
    Topology t;
    std::string name;
    CollectiveMode mode = CollectiveMode::Endpoint;
    if (!mesh.empty()) {
        int rows = 0, cols = 0;
        require(std::sscanf(mesh.c_str(), "%dx%d", &rows, &cols) == 2 && rows > 0 && cols > 0, ErrorKind::Config,
                "--mesh: expected RxC");
        t = build_mesh(rows, cols, 750 * GBps, border_io_attachments(rows, cols), io_gbps * GBps);
        name = mesh + " mesh";
    } else {
        PlatformSpec p = load_platform(platform);
        t = p.build();
        name = p.name;
        mode = effective_mode(p, parse_mode(mode_s));
    }
    const double rate = io_gbps * GBps;
    ChannelLoad cl = max_channel_load(io_broadcast_demands(t, rate), t, mode, rate);
    std::printf("%s: %zu I/O channels broadcasting at %.1f GBps\n", name.c_str(), t.io_nodes.size(), io_gbps);
    if (cl.hotspot_link >= 0) {
        const auto& l = t.links[cl.hotspot_link];
        std::printf("hotspot link: %s -> %s\n", t.nodes[l.src].name.c_str(), t.nodes[l.dst].name.c_str());
    }
    std::printf("hotspot factor: %g\nio rate scale: %.6f\n", cl.hotspot_factor, io_rate_scale(t, rate, mode));
    return Ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"FRED wafer-scale fabric models, router and training simulator"};
    app.require_subcommand(1);
    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "Recorded in reports; every algorithm is deterministic");

    std::string platform = "FRED-C";
    bool as_json = false;

    auto* describe = app.add_subcommand("describe", "Summarize a platform");
    describe->add_option("platform", platform, "Preset name or platform JSON");
    describe->add_flag("--json", as_json);

    std::string epoch_file, dot, resolve_s;
    int m = 0, ports = 0;
    auto* route_cmd = app.add_subcommand("route", "Route one flow epoch on a FRED switch");
    route_cmd->add_option("epoch", epoch_file, "Epoch JSON")->required();
    route_cmd->add_option("--m", m, "Middle subswitch count (overrides the file)");
    route_cmd->add_option("--ports", ports, "Switch ports (overrides the file)");
    route_cmd->add_option("--dot", dot, "Write the conflict graph as Graphviz");
    route_cmd->add_option("--resolve", resolve_s, "block | increase-m | decompose");

    std::string kind = "AllReduce", participants, targets, mode_s;
    std::uint64_t bytes = 1ull << 30;
    auto* plan_cmd = app.add_subcommand("plan", "Plan a collective and measure it alone");
    plan_cmd->add_option("--platform", platform);
    plan_cmd->add_option("--collective", kind);
    plan_cmd->add_option("--participants", participants, "Comma-separated NPU ids (default: all)");
    plan_cmd->add_option("--targets", targets, "Comma-separated NPU ids");
    plan_cmd->add_option("--bytes", bytes);
    plan_cmd->add_option("--mode", mode_s, "endpoint | in-network");
    plan_cmd->add_flag("--json", as_json);

    std::string strategy;
    auto* place_cmd = app.add_subcommand("place", "Place a parallelization strategy and verify its phases");
    place_cmd->add_option("--platform", platform);
    place_cmd->add_option("--strategy", strategy, "MP(a)-DP(b)-PP(c)")->required();

    std::string config, workload, csv, json_out, trace;
    int iterations = 0;
    auto* run_cmd = app.add_subcommand("run", "Simulate one scenario");
    run_cmd->add_option("--config", config, "Scenario JSON");
    auto* run_platform = run_cmd->add_option("--platform", platform);
    run_cmd->add_option("--workload", workload, "Preset name or workload JSON");
    run_cmd->add_option("--strategy", strategy);
    run_cmd->add_option("--mode", mode_s);
    run_cmd->add_option("--iterations", iterations);
    run_cmd->add_option("--csv", csv);
    run_cmd->add_option("--json", json_out);
    run_cmd->add_option("--trace", trace, "Write flow start/finish events as CSV");

    std::vector<std::string> platforms = platform_names();
    std::string out;
    int cmp_iterations = 2;
    auto* compare = app.add_subcommand("compare", "Compare platforms on workloads");
    compare->add_option("--platforms", platforms)->delimiter(',');
    std::string cmp_workload = "all";
    compare->add_option("--workload", cmp_workload, "Preset name, workload JSON or 'all'");
    compare->add_option("--iterations", cmp_iterations);
    compare->add_option("--out", out, "CSV path (default stdout)");

    std::string mesh;
    double io_gbps = 128.0;
    auto* analyze = app.add_subcommand("analyze-load", "Static channel load of all I/O channels broadcasting");
    analyze->add_option("--platform", platform);
    analyze->add_option("--mesh", mesh, "RxC mesh with one I/O channel per border side");
    analyze->add_option("--io-rate", io_gbps, "Channel rate in GBps");
    analyze->add_option("--mode", mode_s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Ok : ConfigError;
    }

    try {
        if (*describe)
            return cmd_describe(platform, as_json);
        if (*route_cmd)
            return cmd_route(epoch_file, m, ports, dot, resolve_s);
        if (*plan_cmd)
            return cmd_plan(platform, kind, participants, targets, bytes, mode_s, as_json);
        if (*place_cmd)
            return cmd_place(platform, strategy);
        if (*run_cmd) {
            ScenarioConfig cfg;
            if (!config.empty())
                apply_scenario_file(cfg, config);
            if (run_platform->count() > 0)
                cfg.platform = load_platform(platform);
            if (!workload.empty())
                cfg.workload = load_workload(workload);
            if (!strategy.empty())
                cfg.strategy = parse_strategy(strategy);
            if (auto md = parse_mode(mode_s))
                cfg.mode = md;
            if (iterations > 0)
                cfg.iterations = iterations;
            if (!csv.empty())
                cfg.csv_path = csv;
            if (!json_out.empty())
                cfg.json_path = json_out;
            if (!trace.empty())
                cfg.trace_path = trace;
            if (app.get_option("--seed")->count() > 0)
                cfg.seed = seed;
            return cmd_run(cfg);
        }
        if (*compare)
            return cmd_compare(platforms, cmp_workload, cmp_iterations, out);
        if (*analyze)
            return cmd_analyze_load(platform, mesh, io_gbps, mode_s);
    } catch (const Error& e) {
        std::fprintf(stderr, "error (%s): %s\n", to_string(e.kind()), e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return SimulationError;
    }
    return Ok;
}
