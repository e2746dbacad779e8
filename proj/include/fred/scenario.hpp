#ifndef FRED_SCENARIO_HPP
#define FRED_SCENARIO_HPP

// Platform and workload presets, JSON configs, scenario runs, comparisons
// and report emission.

#include "fred/collectives.hpp"
#include "fred/error.hpp"
#include "fred/placement.hpp"
#include "fred/sim.hpp"
#include "fred/topology.hpp"
#include "fred/workload.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

namespace fred {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Platforms

enum class PlatformKind { Mesh, Fabric };

struct PlatformSpec {
    std::string name;
    PlatformKind kind = PlatformKind::Mesh;
    // mesh
    int rows = 4;
    int cols = 5;
    double link_bandwidth = 750 * GBps;
    double io_bandwidth = 128 * GBps;
    bool border_io = true;
    double hop_latency = default_hop_latency;
    // fabric
    FabricSpec fabric;
    CollectiveMode mode = CollectiveMode::Endpoint;
    bool in_network_capable = false;

    Topology build() const
    {
        if (kind == PlatformKind::Mesh) {
            std::vector<IoAttachment> ios;
            if (border_io)
                ios = border_io_attachments(rows, cols);
            return build_mesh(rows, cols, link_bandwidth, ios, io_bandwidth, hop_latency);
        }
        return build_fred_fabric(fabric);
    }
};

/// 20 NPUs under five 4-NPU leaf switches joined by one spine; I/O
/// controllers spread 4,4,4,3,3 over the leaves.
inline FabricSpec fred_two_level_fabric(double uplink_total, int m = 3)
{
    FabricSpec f;
    FabricSwitchSpec root;
    root.name = "L2";
    root.m = m;
    f.switches.push_back(root);
    const int ios[5] = {4, 4, 4, 3, 3};
    for (int i = 0; i < 5; ++i) {
        FabricSwitchSpec leaf;
        leaf.name = "L1." + std::to_string(i);
        leaf.m = m;
        leaf.parent = 0;
        leaf.uplink_lanes = 4;
        leaf.uplink_bandwidth = uplink_total;
        leaf.npus = {4 * i, 4 * i + 1, 4 * i + 2, 4 * i + 3};
        leaf.io_count = ios[i];
        f.switches.push_back(leaf);
    }
    return f;
}

inline std::vector<std::string> platform_names() { return {"Baseline", "FRED-A", "FRED-B", "FRED-C", "FRED-D"}; }

inline PlatformSpec platform_preset(const std::string& name)
{
    PlatformSpec p;
    p.name = name;
    if (name == "Baseline") {
        p.kind = PlatformKind::Mesh;
        return p;
    }
    const bool narrow = name == "FRED-A" || name == "FRED-B";
    const bool in_net = name == "FRED-B" || name == "FRED-D";
    require(narrow || name == "FRED-C" || name == "FRED-D", ErrorKind::Config, "unknown platform '" + name + "'");
    p.kind = PlatformKind::Fabric;
    p.fabric = fred_two_level_fabric(narrow ? 1.5 * TBps : 12 * TBps);
    p.mode = in_net ? CollectiveMode::InNetwork : CollectiveMode::Endpoint;
    p.in_network_capable = in_net;
    return p;
}

// ---------------------------------------------------------------------------
// Workload presets

namespace detail {

// Splits `total` over `n` blocks by weight; the last block takes the rounding.
inline std::vector<std::uint64_t> split_bytes(std::uint64_t total, const std::vector<double>& weights)
{
    double sum = 0.0;
    for (double w : weights)
        sum += w;
    std::vector<std::uint64_t> out;
    std::uint64_t used = 0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
        auto b = static_cast<std::uint64_t>(static_cast<double>(total) * weights[i] / sum);
        out.push_back(b);
        used += b;
    }
    out.push_back(total - used);
    return out;
}

struct TransformerShape {
    double params;
    int layers;
    int hidden;
    int seq;
};

// Uniform transformer blocks. MP payload: two All-Reduces of the block
// input activation per layer and pass.
inline WorkloadSpec transformer(const std::string& name, const TransformerShape& sh, int blocks,
                                const ParallelStrategy& s, ExecutionMode mode, int microbatches)
{
    WorkloadSpec w;
    w.name = name;
    w.strategy = s;
    w.mode = mode;
    w.microbatches = microbatches;
    w.parameter_bytes = static_cast<std::uint64_t>(sh.params) * 2;
    w.gradient_bytes = w.parameter_bytes;
    w.sample_bytes = static_cast<std::uint64_t>(sh.seq) * sh.hidden * 2;
    const int samples_per_mb = w.samples_per_replica / microbatches;
    const std::uint64_t act = static_cast<std::uint64_t>(samples_per_mb) * sh.seq * sh.hidden * 2;
    auto params = split_bytes(w.parameter_bytes, std::vector<double>(blocks, 1.0));
    const double layers_per_block = static_cast<double>(sh.layers) / blocks;
    for (int b = 0; b < blocks; ++b) {
        LayerSpec l;
        l.name = "block" + std::to_string(b);
        l.param_bytes = params[b];
        l.activation_bytes = act;
        l.mp_bytes = s.mp > 1 ? static_cast<std::uint64_t>(2.0 * layers_per_block * static_cast<double>(act)) : 0;
        w.layers.push_back(l);
    }
    return w;
}

// Compute at 1000 TFLOPS peak: 2 FLOPs per parameter and token forward,
// twice that backward, sharded over the MP group.
inline void flop_compute(WorkloadSpec& w, double params_per_block, double tokens_per_mb)
{
    const double fwd = 2.0 * params_per_block * tokens_per_mb / w.strategy.mp / 1e15;
    for (auto& l : w.layers) {
        l.fwd_seconds = fwd;
        l.bwd_seconds = 2.0 * fwd;
    }
}

// Compute pinned to a fraction of the time one block takes to stream in at
// the full rate of 18 I/O channels of 128 GBps.
inline void stream_bound_compute(WorkloadSpec& w, double fraction)
{
    const double io_rate = 18 * 128 * GBps;
    for (auto& l : w.layers) {
        const double t_load = static_cast<double>(l.param_bytes) / io_rate;
        l.fwd_seconds = fraction * t_load / w.microbatches;
        l.bwd_seconds = 2.0 * l.fwd_seconds;
    }
}

} // namespace detail

inline std::vector<std::string> workload_names() { return {"ResNet-152", "Transformer-17B", "GPT-3", "Transformer-1T"}; }

inline WorkloadSpec workload_preset(const std::string& name)
{
    if (name == "ResNet-152") {
        WorkloadSpec w;
        w.name = name;
        w.strategy = {1, 20, 1};
        w.mode = ExecutionMode::WeightStationary;
        w.parameter_bytes = 60'200'000ull * 2;
        w.gradient_bytes = w.parameter_bytes;
        w.sample_bytes = 224 * 224 * 3 * 2;
        // stem+conv2, conv3, conv4, conv5+fc; parameters in millions
        const std::vector<double> params_m = {0.22, 1.22, 41.7, 17.06};
        auto bytes = detail::split_bytes(w.parameter_bytes, params_m);
        const double fwd_flops = 2.0 * 11.5e9 * w.samples_per_replica;
        for (std::size_t b = 0; b < bytes.size(); ++b) {
            LayerSpec l;
            l.name = "stage" + std::to_string(b + 2);
            l.param_bytes = bytes[b];
            l.fwd_seconds = fwd_flops / 4 / 1e15;
            l.bwd_seconds = 2.0 * l.fwd_seconds;
            w.layers.push_back(l);
        }
        return w;
    }
    if (name == "Transformer-17B") {
        detail::TransformerShape sh{17e9, 78, 4256, 1024};
        auto w = detail::transformer(name, sh, 8, {3, 3, 2}, ExecutionMode::WeightStationary, 8);
        detail::flop_compute(w, sh.params / 8, 2.0 * sh.seq);
        return w;
    }
    if (name == "GPT-3") {
        detail::TransformerShape sh{175e9, 96, 12288, 2048};
        auto w = detail::transformer(name, sh, 8, {2, 5, 2}, ExecutionMode::WeightStreaming, 2);
        detail::stream_bound_compute(w, 0.5);
        return w;
    }
    if (name == "Transformer-1T") {
        detail::TransformerShape sh{1e12, 128, 25600, 2048};
        auto w = detail::transformer(name, sh, 8, {1, 20, 1}, ExecutionMode::WeightStreaming, 1);
        detail::stream_bound_compute(w, 0.3);
        return w;
    }
    throw Error(ErrorKind::Config, "unknown workload '" + name + "'");
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline const json& field(const json& j, const std::string& key, const std::string& path)
{
    require(j.is_object(), ErrorKind::Config, path + ": expected an object");
    auto it = j.find(key);
    require(it != j.end(), ErrorKind::Config, path + "." + key + ": missing");
    return *it;
}

template <typename T>
T get_as(const json& j, const std::string& path)
{
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorKind::Config, path + ": wrong type");
    }
}

template <typename T>
T get_or(const json& j, const std::string& key, const std::string& path, T fallback)
{
    if (!j.contains(key))
        return fallback;
    return get_as<T>(j.at(key), path + "." + key);
}

} // namespace detail

inline ParallelStrategy parse_strategy(const std::string& text)
{
    static const std::regex re(R"(^\s*MP\((\d+)\)[-_]DP\((\d+)\)[-_]PP\((\d+)\)\s*$)", std::regex::icase);
    std::smatch m;
    require(std::regex_match(text, m, re), ErrorKind::Config,
            "strategy '" + text + "' is not of the form MP(a)-DP(b)-PP(c)");
    ParallelStrategy s{std::stoi(m[1]), std::stoi(m[2]), std::stoi(m[3])};
    require(s.mp >= 1 && s.dp >= 1 && s.pp >= 1, ErrorKind::Config, "strategy dimensions must be at least 1");
    return s;
}

inline ParallelStrategy strategy_from_json(const json& j, const std::string& path)
{
    if (j.is_string())
        return parse_strategy(j.get<std::string>());
    ParallelStrategy s;
    s.mp = detail::get_or(j, "mp", path, 1);
    s.dp = detail::get_or(j, "dp", path, 1);
    s.pp = detail::get_or(j, "pp", path, 1);
    require(s.mp >= 1 && s.dp >= 1 && s.pp >= 1, ErrorKind::Config, path + ": dimensions must be at least 1");
    return s;
}

inline CollectiveMode mode_from_string(const std::string& s, const std::string& path)
{
    if (s == "endpoint" || s == "Endpoint")
        return CollectiveMode::Endpoint;
    if (s == "in-network" || s == "InNetwork" || s == "innetwork")
        return CollectiveMode::InNetwork;
    throw Error(ErrorKind::Config, path + ": unknown collective mode '" + s + "'");
}

inline json workload_to_json(const WorkloadSpec& w)
{
    json j;
    j["name"] = w.name;
    j["mode"] = to_string(w.mode);
    j["strategy"] = w.strategy.name();
    j["microbatches"] = w.microbatches;
    j["datatype_bytes"] = w.datatype_bytes;
    j["samples_per_replica"] = w.samples_per_replica;
    j["sample_bytes"] = w.sample_bytes;
    j["stream_window"] = w.stream_window;
    j["parameter_bytes"] = w.parameter_bytes;
    j["gradient_bytes"] = w.gradient_bytes;
    json layers = json::array();
    for (const auto& l : w.layers) {
        json lj;
        lj["name"] = l.name;
        lj["fwd_seconds"] = l.fwd_seconds;
        lj["bwd_seconds"] = l.bwd_seconds;
        lj["mp_pattern"] = to_string(l.mp_pattern);
        lj["mp_bytes"] = l.mp_bytes;
        lj["activation_bytes"] = l.activation_bytes;
        lj["param_bytes"] = l.param_bytes;
        layers.push_back(lj);
    }
    j["layers"] = layers;
    return j;
}

inline WorkloadSpec workload_from_json(const json& j, const std::string& path = "workload")
{
    using detail::get_or;
    WorkloadSpec w;
    w.name = get_or<std::string>(j, "name", path, "custom");
    const auto mode = get_or<std::string>(j, "mode", path, "WeightStationary");
    if (mode == "WeightStationary")
        w.mode = ExecutionMode::WeightStationary;
    else if (mode == "WeightStreaming")
        w.mode = ExecutionMode::WeightStreaming;
    else
        throw Error(ErrorKind::Config, path + ".mode: unknown execution mode '" + mode + "'");
    if (j.contains("strategy"))
        w.strategy = strategy_from_json(j.at("strategy"), path + ".strategy");
    w.microbatches = get_or(j, "microbatches", path, 1);
    w.datatype_bytes = get_or(j, "datatype_bytes", path, 2);
    w.samples_per_replica = get_or(j, "samples_per_replica", path, 16);
    w.sample_bytes = get_or<std::uint64_t>(j, "sample_bytes", path, 0);
    w.stream_window = get_or(j, "stream_window", path, 0);
    w.parameter_bytes = get_or<std::uint64_t>(j, "parameter_bytes", path, 0);
    w.gradient_bytes = get_or<std::uint64_t>(j, "gradient_bytes", path, w.parameter_bytes);
    if (j.contains("layers")) {
        const auto& arr = j.at("layers");
        require(arr.is_array(), ErrorKind::Config, path + ".layers: expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string lp = path + ".layers[" + std::to_string(i) + "]";
            const auto& lj = arr[i];
            LayerSpec l;
            l.name = get_or<std::string>(lj, "name", lp, "layer" + std::to_string(i));
            l.fwd_seconds = get_or(lj, "fwd_seconds", lp, 0.0);
            l.bwd_seconds = get_or(lj, "bwd_seconds", lp, 0.0);
            const auto pat = get_or<std::string>(lj, "mp_pattern", lp, "AllReduce");
            auto kind = collective_from_string(pat);
            require(kind.has_value(), ErrorKind::Config, lp + ".mp_pattern: unknown collective '" + pat + "'");
            l.mp_pattern = *kind;
            l.mp_bytes = get_or<std::uint64_t>(lj, "mp_bytes", lp, 0);
            l.activation_bytes = get_or<std::uint64_t>(lj, "activation_bytes", lp, 0);
            l.param_bytes = get_or<std::uint64_t>(lj, "param_bytes", lp, 0);
            w.layers.push_back(l);
        }
    }
    require(w.microbatches >= 1, ErrorKind::Config, path + ".microbatches: must be at least 1");
    return w;
}

inline json fabric_to_json(const FabricSpec& f)
{
    json j;
    j["npu_bandwidth_gbps"] = f.npu_bandwidth / GBps;
    j["io_bandwidth_gbps"] = f.io_bandwidth / GBps;
    j["hop_latency_ns"] = f.hop_latency * 1e9;
    j["middle_reduction"] = f.switch_options.middle_reduction;
    json sw = json::array();
    for (const auto& s : f.switches) {
        json sj;
        sj["name"] = s.name;
        sj["m"] = s.m;
        sj["parent"] = s.parent;
        sj["uplink_lanes"] = s.uplink_lanes;
        sj["uplink_bandwidth_gbps"] = s.uplink_bandwidth / GBps;
        sj["npus"] = s.npus;
        sj["io_count"] = s.io_count;
        sw.push_back(sj);
    }
    j["switches"] = sw;
    return j;
}

inline FabricSpec fabric_from_json(const json& j, const std::string& path)
{
    using detail::get_or;
    FabricSpec f;
    f.npu_bandwidth = get_or(j, "npu_bandwidth_gbps", path, 3000.0) * GBps;
    f.io_bandwidth = get_or(j, "io_bandwidth_gbps", path, 128.0) * GBps;
    f.hop_latency = get_or(j, "hop_latency_ns", path, default_hop_latency * 1e9) * 1e-9;
    f.switch_options.middle_reduction = get_or(j, "middle_reduction", path, true);
    const auto& arr = detail::field(j, "switches", path);
    require(arr.is_array() && !arr.empty(), ErrorKind::Config, path + ".switches: expected a non-empty array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string sp = path + ".switches[" + std::to_string(i) + "]";
        const auto& sj = arr[i];
        FabricSwitchSpec s;
        s.name = get_or<std::string>(sj, "name", sp, "S" + std::to_string(i));
        s.m = get_or(sj, "m", sp, 3);
        s.parent = get_or(sj, "parent", sp, -1);
        s.uplink_lanes = get_or(sj, "uplink_lanes", sp, 0);
        s.uplink_bandwidth = get_or(sj, "uplink_bandwidth_gbps", sp, 0.0) * GBps;
        s.npus = get_or<std::vector<int>>(sj, "npus", sp, {});
        s.io_count = get_or(sj, "io_count", sp, 0);
        f.switches.push_back(s);
    }
    return f;
}

inline PlatformSpec platform_from_json(const json& j, const std::string& path = "platform")
{
    using detail::get_or;
    if (j.is_string())
        return platform_preset(j.get<std::string>());
    PlatformSpec p;
    p.name = get_or<std::string>(j, "name", path, "custom");
    const auto type = detail::get_as<std::string>(detail::field(j, "type", path), path + ".type");
    if (type == "mesh") {
        p.kind = PlatformKind::Mesh;
        p.rows = get_or(j, "rows", path, 4);
        p.cols = get_or(j, "cols", path, 5);
        p.link_bandwidth = get_or(j, "link_bandwidth_gbps", path, 750.0) * GBps;
        p.io_bandwidth = get_or(j, "io_bandwidth_gbps", path, 128.0) * GBps;
        p.border_io = get_or(j, "border_io", path, true);
        p.hop_latency = get_or(j, "hop_latency_ns", path, default_hop_latency * 1e9) * 1e-9;
        require(p.rows >= 1 && p.cols >= 1, ErrorKind::Config, path + ": mesh dimensions must be positive");
    } else if (type == "fabric") {
        p.kind = PlatformKind::Fabric;
        p.fabric = fabric_from_json(detail::field(j, "fabric", path), path + ".fabric");
        p.in_network_capable = get_or(j, "in_network", path, true);
        p.mode = p.in_network_capable ? CollectiveMode::InNetwork : CollectiveMode::Endpoint;
    } else {
        throw Error(ErrorKind::Config, path + ".type: expected 'mesh' or 'fabric'");
    }
    if (j.contains("mode"))
        p.mode = mode_from_string(detail::get_as<std::string>(j.at("mode"), path + ".mode"), path + ".mode");
    return p;
}

inline json read_json_file(const std::string& file)
{
    std::ifstream in(file);
    require(in.good(), ErrorKind::Config, "cannot open '" + file + "'");
    try {
        return json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Config, file + ": " + e.what());
    }
}

namespace detail {

inline bool is_json_path(const std::string& s)
{
    return s.size() > 5 && s.compare(s.size() - 5, 5, ".json") == 0;
}

} // namespace detail

/// Preset name, or path of a platform JSON file.
inline PlatformSpec load_platform(const std::string& name_or_file)
{
    if (detail::is_json_path(name_or_file))
        return platform_from_json(read_json_file(name_or_file), name_or_file);
    return platform_preset(name_or_file);
}

/// Preset name, or path of a workload JSON file.
inline WorkloadSpec load_workload(const std::string& name_or_file)
{
    if (detail::is_json_path(name_or_file))
        return workload_from_json(read_json_file(name_or_file), name_or_file);
    return workload_preset(name_or_file);
}

// ---------------------------------------------------------------------------
// Scenarios

struct ScenarioConfig {
    PlatformSpec platform = platform_preset("Baseline");
    WorkloadSpec workload = workload_preset("ResNet-152");
    std::optional<ParallelStrategy> strategy;
    std::optional<CollectiveMode> mode;
    int iterations = 2;
    std::uint64_t seed = 0;
    bool trace = false;
    std::string csv_path;
    std::string json_path;
    std::string trace_path;
};

/// Applies the keys of `j` on top of `cfg`. Relative .json paths in `j`
/// resolve against `base_dir`.
inline void apply_scenario_json(ScenarioConfig& cfg, const json& j, const std::string& path = "scenario",
                                const std::string& base_dir = "")
{
    using detail::get_or;
    require(j.is_object(), ErrorKind::Config, path + ": expected an object");
    auto resolve = [&](const std::string& name) {
        if (!detail::is_json_path(name) || base_dir.empty() || std::filesystem::path(name).is_absolute())
            return name;
        return (std::filesystem::path(base_dir) / name).string();
    };
    if (j.contains("platform")) {
        const auto& p = j.at("platform");
        cfg.platform = p.is_string() ? load_platform(resolve(p.get<std::string>()))
                                     : platform_from_json(p, path + ".platform");
    }
    if (j.contains("workload")) {
        const auto& w = j.at("workload");
        cfg.workload = w.is_string() ? load_workload(resolve(w.get<std::string>()))
                                     : workload_from_json(w, path + ".workload");
    }
    if (j.contains("strategy"))
        cfg.strategy = strategy_from_json(j.at("strategy"), path + ".strategy");
    if (j.contains("mode"))
        cfg.mode = mode_from_string(detail::get_as<std::string>(j.at("mode"), path + ".mode"), path + ".mode");
    cfg.iterations = get_or(j, "iterations", path, cfg.iterations);
    cfg.seed = get_or(j, "seed", path, cfg.seed);
    cfg.trace = get_or(j, "trace", path, cfg.trace);
    if (j.contains("output")) {
        const auto& o = j.at("output");
        cfg.csv_path = get_or(o, "csv", path + ".output", cfg.csv_path);
        cfg.json_path = get_or(o, "json", path + ".output", cfg.json_path);
        cfg.trace_path = get_or(o, "trace", path + ".output", cfg.trace_path);
    }
    require(cfg.iterations >= 1, ErrorKind::Config, path + ".iterations: must be at least 1");
}

/// Layers a scenario file over `cfg`; file references inside it are
/// relative to the file's directory.
inline void apply_scenario_file(ScenarioConfig& cfg, const std::string& file)
{
    apply_scenario_json(cfg, read_json_file(file), file, std::filesystem::path(file).parent_path().string());
}

inline CollectiveMode effective_mode(const PlatformSpec& p, std::optional<CollectiveMode> override_mode)
{
    if (!override_mode)
        return p.kind == PlatformKind::Mesh ? CollectiveMode::Endpoint : p.mode;
    require(!(*override_mode == CollectiveMode::InNetwork && !p.in_network_capable), ErrorKind::Config,
            "platform " + p.name + " cannot execute collectives in the network");
    return *override_mode;
}

inline SimReport run_scenario(const ScenarioConfig& cfg)
{
    Topology t = cfg.platform.build();
    const ParallelStrategy s = cfg.strategy.value_or(cfg.workload.strategy);
    WorkloadSpec w = cfg.workload;
    w.strategy = s;
    validate_workload(w, !t.io_nodes.empty());
    Placement p = place(s, t);
    IterationGraph g = build_iteration_graph(w, s, cfg.iterations);
    SimParams params;
    params.mode = effective_mode(cfg.platform, cfg.mode);
    params.trace = cfg.trace || !cfg.trace_path.empty();
    params.platform = cfg.platform.name;
    params.workload = w.name;
    params.seed = cfg.seed;
    return simulate(g, t, p, params);
}

// ---------------------------------------------------------------------------
// Report emission

inline std::string format_number(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9e", v);
    return buf;
}

inline std::vector<std::pair<std::string, double>> report_breakdown(const SimReport& r)
{
    std::vector<std::pair<std::string, double>> out;
    out.push_back({"total", r.total});
    out.push_back({"compute", r.compute});
    for (int c = 1; c < category_count; ++c)
        out.push_back({to_string(static_cast<Category>(c)), r.exposed[c]});
    out.push_back({"idle", r.idle});
    return out;
}

/// One row per category, seconds per iteration.
inline std::string report_csv(const SimReport& r)
{
    std::ostringstream os;
    os << "platform,workload,strategy,mode,category,seconds\n";
    for (const auto& [k, v] : report_breakdown(r))
        os << r.platform << ',' << r.workload << ',' << r.strategy << ',' << r.mode << ',' << k << ','
           << format_number(v) << '\n';
    return os.str();
}

inline json report_json(const SimReport& r)
{
    json j;
    j["platform"] = r.platform;
    j["workload"] = r.workload;
    j["strategy"] = r.strategy;
    j["mode"] = r.mode;
    j["seed"] = r.seed;
    j["iterations"] = r.iterations;
    json times;
    for (const auto& [k, v] : report_breakdown(r))
        times[k] = v;
    j["seconds_per_iteration"] = times;
    json links = json::array();
    for (const auto& l : r.links)
        links.push_back({{"link", l.link}, {"peak", l.peak}, {"mean", l.mean}});
    j["links"] = links;
    json inj;
    for (auto [n, b] : r.npu_injected)
        inj[std::to_string(n)] = b;
    j["npu_injected_bytes"] = inj;
    return j;
}

inline std::string trace_csv(const SimReport& r)
{
    std::ostringstream os;
    os << "time,event,flow,task,bytes\n";
    for (const auto& e : r.trace)
        os << format_number(e.time) << ',' << (e.start ? "start" : "finish") << ',' << e.flow << ',' << e.task << ','
           << format_number(e.bytes) << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Comparisons

struct ComparisonRow {
    SimReport report;
    double speedup = 1.0; // reference total / this total
};

/// Runs one workload on every platform; speedups are relative to the first.
inline std::vector<ComparisonRow> run_comparison(const std::vector<PlatformSpec>& platforms, const WorkloadSpec& w,
                                                 int iterations = 2,
                                                 std::optional<ParallelStrategy> strategy = std::nullopt)
{
    require(platforms.size() >= 2, ErrorKind::Config, "a comparison needs at least two platforms");
    std::vector<ComparisonRow> rows;
    for (const auto& p : platforms) {
        ScenarioConfig cfg;
        cfg.platform = p;
        cfg.workload = w;
        cfg.strategy = strategy;
        cfg.iterations = iterations;
        rows.push_back({run_scenario(cfg), 1.0});
    }
    for (auto& r : rows) {
        require(r.report.workload == rows.front().report.workload, ErrorKind::Config, "mismatched workloads");
        r.speedup = r.report.total > 0.0 ? rows.front().report.total / r.report.total : 1.0;
    }
    return rows;
}

inline std::string comparison_csv_header()
{
    std::string h = "workload,platform,strategy,mode";
    for (const auto& [k, v] : report_breakdown(SimReport{}))
        h += "," + k + "_s";
    return h + ",speedup\n";
}

inline std::string comparison_csv_rows(const std::vector<ComparisonRow>& rows)
{
    std::ostringstream os;
    for (const auto& row : rows) {
        const auto& r = row.report;
        os << r.workload << ',' << r.platform << ',' << r.strategy << ',' << r.mode;
        for (const auto& [k, v] : report_breakdown(r))
            os << ',' << format_number(v);
        os << ',' << format_number(row.speedup) << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Microbenchmark

/// Wafer-wide All-Reduce of `bytes` on the platform in its collective mode.
inline EffectiveBandwidth wafer_all_reduce_bandwidth(const PlatformSpec& p, std::uint64_t bytes)
{
    Topology t = p.build();
    CollectivePattern pat;
    pat.kind = CollectiveKind::AllReduce;
    for (int i = 0; i < t.npu_count; ++i)
        pat.participants.push_back(i);
    pat.bytes = bytes;
    return effective_npu_bandwidth(plan_collective(pat, t, effective_mode(p, std::nullopt)), t);
}

} // namespace fred

#endif // FRED_SCENARIO_HPP
