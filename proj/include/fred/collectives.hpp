#ifndef FRED_COLLECTIVES_HPP
#define FRED_COLLECTIVES_HPP

// Collective patterns compiled into plans: ordered steps of transfers, each
// step optionally carrying the per-switch flow epochs that realize it in the
// network. Endpoint plans are rings and pairwise exchanges over topology paths.

#include "fred/error.hpp"
#include "fred/routing.hpp"
#include "fred/topology.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fred {

enum class CollectiveKind {
    Unicast,
    Multicast,
    Reduce,
    AllReduce,
    AllReduceForward, // experimental
    ReduceScatter,
    AllGather,
    Scatter,
    Gather,
    AllToAll,
};

inline const char* to_string(CollectiveKind k) noexcept
{
    switch (k) {
    case CollectiveKind::Unicast: return "Unicast";
    case CollectiveKind::Multicast: return "Multicast";
    case CollectiveKind::Reduce: return "Reduce";
    case CollectiveKind::AllReduce: return "AllReduce";
    case CollectiveKind::AllReduceForward: return "AllReduceForward";
    case CollectiveKind::ReduceScatter: return "ReduceScatter";
    case CollectiveKind::AllGather: return "AllGather";
    case CollectiveKind::Scatter: return "Scatter";
    case CollectiveKind::Gather: return "Gather";
    case CollectiveKind::AllToAll: return "AllToAll";
    }
    return "?";
}

inline std::optional<CollectiveKind> collective_from_string(const std::string& s)
{
    for (int i = 0; i <= static_cast<int>(CollectiveKind::AllToAll); ++i)
        if (s == to_string(static_cast<CollectiveKind>(i)))
            return static_cast<CollectiveKind>(i);
    return std::nullopt;
}

inline bool is_simple(CollectiveKind k) noexcept
{
    return k == CollectiveKind::Unicast || k == CollectiveKind::Multicast || k == CollectiveKind::Reduce ||
           k == CollectiveKind::AllReduce || k == CollectiveKind::AllReduceForward;
}

/// participants: contributing members (the source for Unicast/Multicast).
/// targets: Unicast/Multicast destinations, the root of Reduce/Scatter/Gather,
/// forward targets of AllReduceForward; unused otherwise.
struct CollectivePattern {
    CollectiveKind kind = CollectiveKind::AllReduce;
    std::vector<int> participants;
    std::vector<int> targets;
    std::uint64_t bytes = 0;
    ReduceOp op = ReduceOp::Sum;
};

inline CollectivePattern normalize_pattern(CollectivePattern p)
{
    auto sort_unique = [](std::vector<int>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    sort_unique(p.participants);
    sort_unique(p.targets);
    const std::string name = to_string(p.kind);
    require(!p.participants.empty(), ErrorKind::Config, name + " needs at least one participant");
    require(p.bytes > 0, ErrorKind::Config, name + " needs a positive byte count");
    const auto n = p.participants.size();
    switch (p.kind) {
    case CollectiveKind::Unicast:
        require(n == 1 && p.targets.size() == 1, ErrorKind::Config, "Unicast needs one source and one destination");
        break;
    case CollectiveKind::Multicast:
        require(n == 1 && !p.targets.empty(), ErrorKind::Config, "Multicast needs one source and destinations");
        break;
    case CollectiveKind::Reduce:
    case CollectiveKind::Scatter:
    case CollectiveKind::Gather:
        require(p.targets.size() == 1, ErrorKind::Config, name + " needs exactly one root");
        require(std::binary_search(p.participants.begin(), p.participants.end(), p.targets[0]), ErrorKind::Config,
                name + " root must be a participant");
        break;
    case CollectiveKind::AllReduce:
    case CollectiveKind::AllReduceForward: break;
    case CollectiveKind::ReduceScatter:
    case CollectiveKind::AllGather:
    case CollectiveKind::AllToAll:
        require(n >= 2, ErrorKind::Config, name + " needs at least 2 participants");
        break;
    }
    if (p.kind == CollectiveKind::AllToAll)
        require(p.bytes % n == 0, ErrorKind::Config, "AllToAll byte count must divide evenly among participants");
    return p;
}

// Near-equal shards of [lo, lo + len), remainder on the last one.
inline std::uint64_t shard_offset(std::uint64_t lo, std::uint64_t len, std::size_t n, std::size_t j)
{
    return lo + j * (len / n);
}

inline std::uint64_t shard_length(std::uint64_t len, std::size_t n, std::size_t j)
{
    return len / n + (j + 1 == n ? len % n : 0);
}

// ---------------------------------------------------------------------------
// Plans

enum class CollectiveMode { InNetwork, Endpoint };

inline const char* to_string(CollectiveMode m) noexcept
{
    return m == CollectiveMode::InNetwork ? "InNetwork" : "Endpoint";
}

enum class BufferSel { Input, Output };
enum class Combine { Overwrite, Accumulate };

/// The sources' [offset, offset + length) ranges are reduced and the result
/// is written to every destination at dst_offset.
struct Transfer {
    int flow = -1; // logical flow id within the step (in-network)
    std::vector<int> sources;
    std::vector<int> destinations;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
    std::uint64_t dst_offset = 0;
    BufferSel read = BufferSel::Output;
    Combine combine = Combine::Overwrite;
    ReduceOp op = ReduceOp::Sum;
    std::vector<int> links;
    int hops = 0;
};

/// Flows one switch routes during a step; switch_index -1 for a lone switch.
struct SwitchEpoch {
    int switch_index = -1;
    std::vector<Flow> flows;
};

struct PlanStep {
    std::vector<Transfer> transfers;
    std::vector<SwitchEpoch> epochs;
    int level = 1; // highest fabric level the step reaches
};

struct CollectivePlan {
    CollectiveKind kind = CollectiveKind::AllReduce;
    CollectiveMode mode = CollectiveMode::InNetwork;
    bool pipelined = false; // steps may stream concurrently in simulation
    std::uint64_t bytes = 0;
    std::vector<int> npus; // every endpoint the plan touches
    std::vector<PlanStep> steps;
};

/// One reduce-then-broadcast over endpoint ids.
struct LogicalFlow {
    std::vector<int> sources;
    std::vector<int> destinations;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
    std::uint64_t dst_offset = 0;
    BufferSel read = BufferSel::Input;
};

/// Pattern semantics as serial steps of concurrent logical flows.
inline std::vector<std::vector<LogicalFlow>> logical_steps(const CollectivePattern& pattern)
{
    const auto p = normalize_pattern(pattern);
    const auto& g = p.participants;
    const std::size_t n = g.size();
    const std::uint64_t d = p.bytes;
    std::vector<std::vector<LogicalFlow>> steps;
    auto whole = [&](std::vector<int> src, std::vector<int> dst) {
        LogicalFlow f;
        f.sources = std::move(src);
        f.destinations = std::move(dst);
        f.length = d;
        return f;
    };
    switch (p.kind) {
    case CollectiveKind::Unicast:
    case CollectiveKind::Multicast: steps.push_back({whole(g, p.targets)}); break;
    case CollectiveKind::Reduce: steps.push_back({whole(g, p.targets)}); break;
    case CollectiveKind::AllReduce: steps.push_back({whole(g, g)}); break;
    case CollectiveKind::AllReduceForward: {
        std::vector<int> out = g;
        out.insert(out.end(), p.targets.begin(), p.targets.end());
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        steps.push_back({whole(g, out)});
        break;
    }
    case CollectiveKind::ReduceScatter:
        for (std::size_t j = 0; j < n; ++j) {
            LogicalFlow f;
            f.sources = g;
            f.destinations = {g[j]};
            f.offset = f.dst_offset = shard_offset(0, d, n, j);
            f.length = shard_length(d, n, j);
            steps.push_back({f});
        }
        break;
    case CollectiveKind::AllGather:
        for (std::size_t j = 0; j < n; ++j) {
            LogicalFlow f;
            f.sources = {g[j]};
            for (int x : g)
                if (x != g[j])
                    f.destinations.push_back(x);
            f.offset = f.dst_offset = shard_offset(0, d, n, j);
            f.length = shard_length(d, n, j);
            steps.push_back({f});
        }
        break;
    case CollectiveKind::Scatter:
    case CollectiveKind::Gather: {
        const int root = p.targets[0];
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<LogicalFlow> step;
            if (g[j] != root) {
                LogicalFlow f;
                f.sources = {p.kind == CollectiveKind::Scatter ? root : g[j]};
                f.destinations = {p.kind == CollectiveKind::Scatter ? g[j] : root};
                f.offset = f.dst_offset = shard_offset(0, d, n, j);
                f.length = shard_length(d, n, j);
                step.push_back(f);
            }
            steps.push_back(step);
        }
        break;
    }
    case CollectiveKind::AllToAll: {
        const std::uint64_t block = d / n;
        // distance j = 1..n-1, then the local step (distance 0) with no traffic
        for (std::size_t j = 1; j <= n; ++j) {
            std::vector<LogicalFlow> step;
            if (j < n)
                for (std::size_t i = 0; i < n; ++i) {
                    const std::size_t to = (i + j) % n;
                    LogicalFlow f;
                    f.sources = {g[i]};
                    f.destinations = {g[to]};
                    f.offset = to * block;
                    f.length = block;
                    f.dst_offset = i * block;
                    step.push_back(f);
                }
            steps.push_back(step);
        }
        break;
    }
    }
    return steps;
}

namespace detail {

inline std::vector<int> plan_endpoints(const CollectivePattern& p)
{
    std::set<int> s(p.participants.begin(), p.participants.end());
    s.insert(p.targets.begin(), p.targets.end());
    return {s.begin(), s.end()};
}

inline Transfer transfer_from(const LogicalFlow& f, int id, ReduceOp op)
{
    Transfer t;
    t.flow = id;
    t.sources = f.sources;
    t.destinations = f.destinations;
    t.offset = f.offset;
    t.length = f.length;
    t.dst_offset = f.dst_offset;
    t.read = f.read;
    t.op = op;
    return t;
}

inline CollectivePlan plan_on_switch(const CollectivePattern& pattern, int switch_ports)
{
    const auto p = normalize_pattern(pattern);
    CollectivePlan plan;
    plan.kind = p.kind;
    plan.mode = CollectiveMode::InNetwork;
    plan.bytes = p.bytes;
    plan.npus = plan_endpoints(p);
    for (int port : plan.npus)
        require(port >= 0 && port < switch_ports, ErrorKind::Config,
                "participant " + std::to_string(port) + " is not a port of this switch; use plan_hierarchical");
    for (const auto& lstep : logical_steps(p)) {
        PlanStep step;
        SwitchEpoch epoch;
        for (std::size_t i = 0; i < lstep.size(); ++i) {
            const auto& lf = lstep[i];
            Transfer t = transfer_from(lf, static_cast<int>(i), p.op);
            t.hops = 1;
            step.transfers.push_back(t);
            Flow f = make_flow(static_cast<int>(i), lf.sources, lf.destinations, lf.length);
            f.op = p.op;
            epoch.flows.push_back(f);
        }
        if (!epoch.flows.empty())
            step.epochs.push_back(epoch);
        plan.steps.push_back(step);
    }
    return plan;
}

} // namespace detail

/// Single-flow patterns on one switch whose ports are the participants.
inline CollectivePlan plan_simple(const CollectivePattern& pattern, int switch_ports)
{
    require(is_simple(pattern.kind), ErrorKind::Config,
            std::string(to_string(pattern.kind)) + " is compound; use plan_compound");
    return detail::plan_on_switch(pattern, switch_ports);
}

/// Compound patterns as serial steps of simple flows on one switch.
inline CollectivePlan plan_compound(const CollectivePattern& pattern, int switch_ports)
{
    require(!is_simple(pattern.kind), ErrorKind::Config,
            std::string(to_string(pattern.kind)) + " is simple; use plan_simple");
    return detail::plan_on_switch(pattern, switch_ports);
}

// ---------------------------------------------------------------------------
// Realizing logical flows on a switch tree

/// Leaf switch index and leaf port of an NPU or I/O controller node.
inline std::pair<int, int> fabric_attachment(const Topology& t, int node)
{
    const auto& fs = t.fabric();
    require(node >= 0 && node < static_cast<int>(t.nodes.size()), ErrorKind::Config,
            "unknown endpoint " + std::to_string(node));
    const auto& n = t.nodes[node];
    if (n.kind == NodeKind::Npu) {
        int leaf = fs.leaf_of_npu[node];
        return {leaf, fs.switches[leaf].npu_port(node)};
    }
    require(n.kind == NodeKind::IoController, ErrorKind::Config, "switches cannot be collective endpoints");
    int leaf = t.nodes[n.attached_to].switch_index;
    return {leaf, fs.switches[leaf].io_port(node)};
}

struct FabricRealization {
    std::vector<SwitchEpoch> epochs; // ascending switch index
    std::vector<std::vector<int>> links; // per logical flow
    std::vector<int> hops;
    std::vector<int> level; // LCA level per logical flow
};

/// Each switch reduces what arrives from below (local sources and child
/// uplinks) before passing one stream up a single lane; the lowest common
/// ancestor turns it around and every switch on the way down distributes.
/// A single-source flow has nothing to reduce, so switches holding the
/// source also serve their own destinations on the way up.
/// Flow ids at a switch: 2k for the upward (or turning) part of logical flow
/// k, 2k + 1 for its downward part. Lanes are taken lowest-free-first per
/// direction in logical-flow order.
inline FabricRealization realize_on_fabric(const Topology& t, const std::vector<LogicalFlow>& flows,
                                           ReduceOp op = ReduceOp::Sum)
{
    require(t.is_fabric(), ErrorKind::Config, "in-network realization needs a FRED fabric");
    const auto& fs = t.fabric();
    const int ns = static_cast<int>(fs.switches.size());
    std::vector<std::vector<char>> up_used(ns), down_used(ns);
    for (int s = 0; s < ns; ++s) {
        up_used[s].assign(fs.switches[s].uplink_lanes, 0);
        down_used[s].assign(fs.switches[s].uplink_lanes, 0);
    }
    std::map<int, std::vector<Flow>> per_switch;
    FabricRealization out;

    for (std::size_t k = 0; k < flows.size(); ++k) {
        const auto& lf = flows[k];
        require(!lf.sources.empty() && !lf.destinations.empty(), ErrorKind::Config, "logical flow without endpoints");
        std::vector<int> cnt_s(ns, 0), cnt_t(ns, 0);
        std::map<int, std::vector<int>> src_ports, dst_ports;
        auto mark = [&](int node, std::vector<int>& cnt, std::map<int, std::vector<int>>& ports) {
            auto [leaf, port] = fabric_attachment(t, node);
            ports[leaf].push_back(port);
            for (int v = leaf; v >= 0; v = fs.switches[v].parent)
                ++cnt[v];
        };
        for (int s : lf.sources)
            mark(s, cnt_s, src_ports);
        for (int d : lf.destinations)
            mark(d, cnt_t, dst_ports);
        const int total = static_cast<int>(lf.sources.size() + lf.destinations.size());
        int lca = fabric_attachment(t, lf.sources.front()).first;
        while (cnt_s[lca] + cnt_t[lca] < total)
            lca = fs.switches[lca].parent;

        const bool single = lf.sources.size() == 1;
        std::vector<int> lane_up(ns, -1), lane_down(ns, -1);
        std::vector<int> links;
        auto take = [&](std::vector<char>& used, int s) {
            for (std::size_t l = 0; l < used.size(); ++l)
                if (!used[l]) {
                    used[l] = 1;
                    return static_cast<int>(l);
                }
            throw Error(ErrorKind::Capacity, "switch " + std::to_string(s) + " has no free uplink lane");
        };
        std::vector<int> involved;
        for (int s = 0; s < ns; ++s) {
            if (cnt_s[s] + cnt_t[s] == 0)
                continue;
            bool under = false;
            for (int v = s; v >= 0; v = fs.switches[v].parent)
                if (v == lca)
                    under = true;
            if (!under)
                continue;
            involved.push_back(s);
            if (s == lca)
                continue;
            const int parent_node = fs.switches[fs.switches[s].parent].node;
            if (cnt_s[s] > 0) {
                lane_up[s] = take(up_used[s], s);
                links.push_back(t.link_between(fs.switches[s].node, parent_node));
            }
            if (cnt_t[s] > 0 && !(single && cnt_s[s] > 0)) {
                lane_down[s] = take(down_used[s], s);
                links.push_back(t.link_between(parent_node, fs.switches[s].node));
            }
        }
        for (int s : lf.sources)
            if (t.nodes[s].kind == NodeKind::Npu || t.nodes[s].kind == NodeKind::IoController)
                links.push_back(t.link_between(s, fs.switches[fabric_attachment(t, s).first].node));
        for (int d : lf.destinations)
            links.push_back(t.link_between(fs.switches[fabric_attachment(t, d).first].node, d));
        std::sort(links.begin(), links.end());
        links.erase(std::unique(links.begin(), links.end()), links.end());

        for (int s : involved) {
            const auto& sw = fs.switches[s];
            std::vector<int> up_in = src_ports[s], down_out = dst_ports[s];
            for (std::size_t c = 0; c < sw.children.size(); ++c) {
                const int child = sw.children[c];
                const int base = sw.child_port_base(static_cast<int>(c), fs.switches);
                if (lane_up[child] >= 0)
                    up_in.push_back(base + lane_up[child]);
                if (lane_down[child] >= 0)
                    down_out.push_back(base + lane_down[child]);
            }
            const int id = static_cast<int>(2 * k);
            if (s == lca) {
                Flow f = make_flow(id, up_in, down_out, lf.length);
                f.op = op;
                per_switch[s].push_back(f);
                continue;
            }
            if (lane_up[s] >= 0) {
                std::vector<int> outs{sw.uplink_port_base() + lane_up[s]};
                if (lane_down[s] < 0)
                    outs.insert(outs.end(), down_out.begin(), down_out.end());
                Flow f = make_flow(id, up_in, outs, lf.length);
                f.op = op;
                per_switch[s].push_back(f);
            }
            if (lane_down[s] >= 0) {
                Flow f = make_flow(id + 1, {sw.uplink_port_base() + lane_down[s]}, down_out, lf.length);
                f.op = op;
                per_switch[s].push_back(f);
            }
        }
        out.links.push_back(links);
        out.level.push_back(fs.switches[lca].level);
        out.hops.push_back(2 * fs.switches[lca].level);
    }
    for (auto& [s, fl] : per_switch)
        out.epochs.push_back({s, fl});
    return out;
}

/// In-network plan on a FRED fabric; participants are NPU or I/O node ids.
inline CollectivePlan plan_hierarchical(const CollectivePattern& pattern, const Topology& t)
{
    require(t.is_fabric(), ErrorKind::Config, "plan_hierarchical needs a FRED fabric");
    const auto p = normalize_pattern(pattern);
    CollectivePlan plan;
    plan.kind = p.kind;
    plan.mode = CollectiveMode::InNetwork;
    plan.bytes = p.bytes;
    plan.npus = detail::plan_endpoints(p);
    for (const auto& lstep : logical_steps(p)) {
        PlanStep step;
        FabricRealization r = realize_on_fabric(t, lstep, p.op);
        for (std::size_t i = 0; i < lstep.size(); ++i) {
            Transfer tr = detail::transfer_from(lstep[i], static_cast<int>(i), p.op);
            tr.links = r.links[i];
            tr.hops = r.hops[i];
            step.level = std::max(step.level, r.level[i]);
            step.transfers.push_back(tr);
        }
        step.epochs = r.epochs;
        plan.steps.push_back(step);
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Endpoint algorithms

/// Directed link ids from endpoint `a` to endpoint `b` (NPUs or I/O nodes).
inline std::vector<int> endpoint_path(const Topology& t, int a, int b, bool x_first = true)
{
    if (a == b)
        return {};
    if (t.is_fabric())
        return fabric_path(t, a, b);
    std::vector<int> path;
    int from = a, to = b;
    if (t.nodes[a].kind == NodeKind::IoController) {
        from = t.nodes[a].attached_to;
        path.push_back(t.link_between(a, from));
    }
    if (t.nodes[b].kind == NodeKind::IoController)
        to = t.nodes[b].attached_to;
    auto mid = mesh_path(t, from, to, x_first);
    path.insert(path.end(), mid.begin(), mid.end());
    if (to != b)
        path.push_back(t.link_between(to, b));
    return path;
}

namespace detail {

inline Transfer unicast(int src, int dst, std::uint64_t off, std::uint64_t len, std::uint64_t dst_off, BufferSel read,
                        Combine combine, ReduceOp op)
{
    Transfer t;
    t.sources = {src};
    t.destinations = {dst};
    t.offset = off;
    t.length = len;
    t.dst_offset = dst_off;
    t.read = read;
    t.combine = combine;
    t.op = op;
    return t;
}

inline int wrap(int i, int n) { return ((i % n) + n) % n; }

// Ring reduce-scatter over [lo, lo + len): afterwards members[j] holds the
// reduction of shard j. dir = +1 sends to the next member, -1 to the previous.
inline std::vector<PlanStep> ring_reduce_scatter(const std::vector<int>& members, std::uint64_t lo, std::uint64_t len,
                                                 int dir, ReduceOp op)
{
    const int n = static_cast<int>(members.size());
    std::vector<PlanStep> steps;
    for (int k = 0; k + 1 < n; ++k) {
        PlanStep step;
        for (int i = 0; i < n; ++i) {
            int shard = wrap(i - dir * (1 + k), n);
            auto l = shard_length(len, n, shard);
            if (l == 0)
                continue;
            auto off = shard_offset(lo, len, n, shard);
            step.transfers.push_back(unicast(members[i], members[wrap(i + dir, n)], off, l, off, BufferSel::Output,
                                             Combine::Accumulate, op));
        }
        steps.push_back(step);
    }
    return steps;
}

inline std::vector<PlanStep> ring_all_gather(const std::vector<int>& members, std::uint64_t lo, std::uint64_t len,
                                             int dir, ReduceOp op)
{
    const int n = static_cast<int>(members.size());
    std::vector<PlanStep> steps;
    for (int k = 0; k + 1 < n; ++k) {
        PlanStep step;
        for (int i = 0; i < n; ++i) {
            int shard = wrap(i - dir * k, n);
            auto l = shard_length(len, n, shard);
            if (l == 0)
                continue;
            auto off = shard_offset(lo, len, n, shard);
            step.transfers.push_back(unicast(members[i], members[wrap(i + dir, n)], off, l, off, BufferSel::Output,
                                             Combine::Overwrite, op));
        }
        steps.push_back(step);
    }
    return steps;
}

inline std::vector<PlanStep> ring_all_reduce(const std::vector<int>& members, std::uint64_t lo, std::uint64_t len,
                                             int dir, ReduceOp op)
{
    auto steps = ring_reduce_scatter(members, lo, len, dir, op);
    auto ag = ring_all_gather(members, lo, len, dir, op);
    steps.insert(steps.end(), ag.begin(), ag.end());
    return steps;
}

inline void append(std::vector<PlanStep>& a, const std::vector<PlanStep>& b) { a.insert(a.end(), b.begin(), b.end()); }

// Runs independent step sequences side by side.
inline std::vector<PlanStep> merge_parallel(const std::vector<std::vector<PlanStep>>& seqs)
{
    std::size_t len = 0;
    for (const auto& s : seqs)
        len = std::max(len, s.size());
    std::vector<PlanStep> out(len);
    for (const auto& s : seqs)
        for (std::size_t i = 0; i < s.size(); ++i)
            out[i].transfers.insert(out[i].transfers.end(), s[i].transfers.begin(), s[i].transfers.end());
    return out;
}

// Two-dimensional hierarchical AllReduce over a full mesh in two half-size
// chunks: rows then columns for the first, columns then rows (and reversed
// ring direction) for the second.
inline std::vector<PlanStep> mesh_2d_all_reduce(const MeshStructure& m, std::uint64_t d, ReduceOp op)
{
    auto row = [&](int r) {
        std::vector<int> v;
        for (int c = 0; c < m.cols; ++c)
            v.push_back(r * m.cols + c);
        return v;
    };
    auto col = [&](int c) {
        std::vector<int> v;
        for (int r = 0; r < m.rows; ++r)
            v.push_back(r * m.cols + c);
        return v;
    };
    auto chunk = [&](std::uint64_t lo, std::uint64_t len, bool rows_first, int dir) {
        const int outer_n = rows_first ? m.rows : m.cols; // number of first-phase rings
        const int ring_n = rows_first ? m.cols : m.rows;  // members per first-phase ring
        auto first = [&](int i) { return rows_first ? row(i) : col(i); };
        auto second = [&](int j) { return rows_first ? col(j) : row(j); };
        std::vector<PlanStep> seq;
        std::vector<std::vector<PlanStep>> par;
        for (int i = 0; i < outer_n; ++i)
            par.push_back(ring_reduce_scatter(first(i), lo, len, dir, op));
        append(seq, merge_parallel(par));
        par.clear();
        for (int j = 0; j < ring_n; ++j)
            par.push_back(ring_all_reduce(second(j), shard_offset(lo, len, ring_n, j), shard_length(len, ring_n, j),
                                          dir, op));
        append(seq, merge_parallel(par));
        par.clear();
        for (int i = 0; i < outer_n; ++i)
            par.push_back(ring_all_gather(first(i), lo, len, dir, op));
        append(seq, merge_parallel(par));
        return seq;
    };
    const std::uint64_t half = d / 2;
    return merge_parallel({chunk(0, half, true, +1), chunk(half, d - half, false, -1)});
}

// Fabric endpoint AllReduce with k members under each of several leaves:
// local reduce-scatter, cross-leaf AllReduce per local shard, local gather.
inline std::optional<std::vector<PlanStep>> leaf_hierarchical_all_reduce(const Topology& t,
                                                                          const std::vector<int>& g,
                                                                          std::uint64_t d, ReduceOp op)
{
    std::map<int, std::vector<int>> by_leaf;
    for (int n : g) {
        if (t.nodes[n].kind != NodeKind::Npu)
            return std::nullopt;
        by_leaf[t.fabric().leaf_of_npu[n]].push_back(n);
    }
    if (by_leaf.size() < 2)
        return std::nullopt;
    const std::size_t k = by_leaf.begin()->second.size();
    if (k < 2)
        return std::nullopt;
    for (const auto& [leaf, members] : by_leaf)
        if (members.size() != k)
            return std::nullopt;
    std::vector<PlanStep> seq;
    std::vector<std::vector<PlanStep>> par;
    for (const auto& [leaf, members] : by_leaf)
        par.push_back(ring_reduce_scatter(members, 0, d, +1, op));
    append(seq, merge_parallel(par));
    par.clear();
    for (std::size_t i = 0; i < k; ++i) {
        std::vector<int> cross;
        for (const auto& [leaf, members] : by_leaf)
            cross.push_back(members[i]);
        par.push_back(ring_all_reduce(cross, shard_offset(0, d, k, i), shard_length(d, k, i), +1, op));
    }
    append(seq, merge_parallel(par));
    par.clear();
    for (const auto& [leaf, members] : by_leaf)
        par.push_back(ring_all_gather(members, 0, d, +1, op));
    append(seq, merge_parallel(par));
    return seq;
}

} // namespace detail

/// Endpoint (NPU-driven) plan over mesh or fabric paths. Rings follow
/// ascending endpoint id; wafer-wide AllReduce uses the hierarchical forms.
inline CollectivePlan plan_endpoint(const CollectivePattern& pattern, const Topology& t)
{
    const auto p = normalize_pattern(pattern);
    const auto& g = p.participants;
    const int n = static_cast<int>(g.size());
    const std::uint64_t d = p.bytes;
    CollectivePlan plan;
    plan.kind = p.kind;
    plan.mode = CollectiveMode::Endpoint;
    plan.bytes = d;
    plan.npus = detail::plan_endpoints(p);
    for (int x : plan.npus)
        require(x >= 0 && x < static_cast<int>(t.nodes.size()) && t.nodes[x].kind != NodeKind::Switch,
                ErrorKind::Config, "endpoint " + std::to_string(x) + " is not an NPU or I/O controller");
    auto& steps = plan.steps;
    using detail::unicast;
    const auto op = p.op;

    switch (p.kind) {
    case CollectiveKind::Unicast:
    case CollectiveKind::Multicast: {
        PlanStep s;
        for (int dst : p.targets)
            if (dst != g[0])
                s.transfers.push_back(unicast(g[0], dst, 0, d, 0, BufferSel::Input, Combine::Overwrite, op));
        steps.push_back(s);
        break;
    }
    case CollectiveKind::Reduce: {
        PlanStep s;
        for (int src : g)
            if (src != p.targets[0])
                s.transfers.push_back(unicast(src, p.targets[0], 0, d, 0, BufferSel::Input, Combine::Accumulate, op));
        steps.push_back(s);
        break;
    }
    case CollectiveKind::AllReduce:
    case CollectiveKind::AllReduceForward: {
        const bool wafer_wide = t.is_mesh() && n == t.npu_count && t.mesh().rows >= 2 && t.mesh().cols >= 2;
        std::optional<std::vector<PlanStep>> hier;
        if (wafer_wide) {
            hier = detail::mesh_2d_all_reduce(t.mesh(), d, op);
        } else if (t.is_fabric()) {
            hier = detail::leaf_hierarchical_all_reduce(t, g, d, op);
        }
        if (hier) {
            steps = *hier;
            plan.pipelined = true;
        } else if (n >= 2) {
            steps = detail::ring_all_reduce(g, 0, d, +1, op);
        }
        if (p.kind == CollectiveKind::AllReduceForward) {
            PlanStep s;
            for (int x : p.targets)
                if (!std::binary_search(g.begin(), g.end(), x))
                    s.transfers.push_back(unicast(g[0], x, 0, d, 0, BufferSel::Output, Combine::Overwrite, op));
            if (!s.transfers.empty())
                steps.push_back(s);
        }
        break;
    }
    case CollectiveKind::ReduceScatter: steps = detail::ring_reduce_scatter(g, 0, d, +1, op); break;
    case CollectiveKind::AllGather: steps = detail::ring_all_gather(g, 0, d, +1, op); break;
    case CollectiveKind::Scatter:
    case CollectiveKind::Gather:
    case CollectiveKind::AllToAll:
        for (const auto& lstep : logical_steps(p)) {
            PlanStep s;
            for (const auto& lf : lstep)
                s.transfers.push_back(unicast(lf.sources[0], lf.destinations[0], lf.offset, lf.length, lf.dst_offset,
                                              BufferSel::Input, Combine::Overwrite, op));
            steps.push_back(s);
        }
        break;
    }
    for (auto& s : steps)
        for (auto& tr : s.transfers) {
            tr.links = endpoint_path(t, tr.sources[0], tr.destinations[0]);
            tr.hops = static_cast<int>(tr.links.size());
        }
    return plan;
}

/// Endpoint plan on the mesh baseline.
inline CollectivePlan plan_mesh_collective(const CollectivePattern& pattern, const Topology& mesh)
{
    require(mesh.is_mesh(), ErrorKind::Config, "plan_mesh_collective needs a 2D mesh");
    return plan_endpoint(pattern, mesh);
}

inline CollectivePlan plan_collective(const CollectivePattern& pattern, const Topology& t, CollectiveMode mode)
{
    if (mode == CollectiveMode::InNetwork) {
        require(t.is_fabric(), ErrorKind::Config, "in-network collectives need a FRED fabric");
        return plan_hierarchical(pattern, t);
    }
    return plan_endpoint(pattern, t);
}

/// Bytes each endpoint sources into the network.
inline std::map<int, std::uint64_t> injected_traffic(const CollectivePlan& plan)
{
    std::map<int, std::uint64_t> out;
    for (int x : plan.npus)
        out[x] = 0;
    for (const auto& s : plan.steps)
        for (const auto& tr : s.transfers)
            for (int src : tr.sources) {
                bool only_self = tr.destinations.size() == 1 && tr.destinations[0] == src && tr.sources.size() == 1;
                if (!only_self)
                    out[src] += tr.length;
            }
    return out;
}

inline std::uint64_t total_injected(const CollectivePlan& plan)
{
    std::uint64_t s = 0;
    for (auto [n, b] : injected_traffic(plan))
        s += b;
    return s;
}

// ---------------------------------------------------------------------------
// Token propagation

using Buffers = std::map<int, Vec>;

namespace detail {

inline Vec slice(const Vec& v, std::uint64_t off, std::uint64_t len)
{
    require(off + len <= v.size(), ErrorKind::Simulation, "transfer range outside buffer");
    return Vec(v.begin() + static_cast<std::ptrdiff_t>(off), v.begin() + static_cast<std::ptrdiff_t>(off + len));
}

inline void deliver(Vec& dst, const Transfer& t, const Vec& value)
{
    require(t.dst_offset + value.size() <= dst.size(), ErrorKind::Simulation, "delivery outside buffer");
    for (std::size_t i = 0; i < value.size(); ++i) {
        auto& x = dst[t.dst_offset + i];
        if (t.combine == Combine::Overwrite)
            x = value[i];
        else
            x = combine(t.op, Vec{x}, Vec{value[i]})[0];
    }
}

inline const Vec& source_buffer(const Transfer& t, int src, const Buffers& in, const Buffers& out)
{
    const Buffers& b = t.read == BufferSel::Input ? in : out;
    auto it = b.find(src);
    require(it != b.end(), ErrorKind::Simulation, "no buffer for endpoint " + std::to_string(src));
    return it->second;
}

// Per-transfer source values and destination lookup for network steps.
struct StepIo {
    std::map<int, std::pair<int, Vec>> sent;  // endpoint -> (transfer, value)
    std::map<int, int> receiver;              // endpoint -> transfer
};

inline StepIo step_io(const PlanStep& step, const Buffers& in, const Buffers& out)
{
    StepIo io;
    for (std::size_t k = 0; k < step.transfers.size(); ++k) {
        const auto& t = step.transfers[k];
        for (int s : t.sources) {
            require(!io.sent.count(s), ErrorKind::Simulation,
                    "endpoint " + std::to_string(s) + " sources two transfers in one step");
            io.sent[s] = {static_cast<int>(k), slice(source_buffer(t, s, in, out), t.offset, t.length)};
        }
        for (int d : t.destinations) {
            require(!io.receiver.count(d), ErrorKind::Simulation,
                    "endpoint " + std::to_string(d) + " receives two transfers in one step");
            io.receiver[d] = static_cast<int>(k);
        }
    }
    return io;
}

inline SwitchAssignment route_or_throw(const std::vector<Flow>& flows, const FredSwitch& sw, int switch_index)
{
    RouteResult r = route(flows, sw);
    if (!r.ok())
        throw Error(ErrorKind::Routing, "switch " + std::to_string(switch_index) + ": " + r.conflict().reason);
    return r.assignment();
}

} // namespace detail

/// Executes a plan on per-endpoint input buffers. Endpoint transfers are
/// applied directly; in-network steps go through routed switch assignments
/// via evaluate(), so the values delivered are what the switch settings
/// produce. `sw` serves plans built on a lone switch, `topo` fabric plans.
inline Buffers execute_plan(const CollectivePlan& plan, const Buffers& inputs, const FredSwitch* sw = nullptr,
                            const Topology* topo = nullptr)
{
    Buffers out = inputs;
    for (const auto& step : plan.steps) {
        const Buffers snapshot = out;
        if (plan.mode == CollectiveMode::Endpoint || step.epochs.empty()) {
            std::vector<std::pair<const Transfer*, Vec>> vals;
            for (const auto& t : step.transfers) {
                std::optional<Vec> v;
                for (int s : t.sources)
                    v = combine_opt(t.op, v, detail::slice(detail::source_buffer(t, s, inputs, snapshot), t.offset,
                                                           t.length));
                vals.push_back({&t, *v});
            }
            for (const auto& [t, v] : vals)
                for (int d : t->destinations)
                    detail::deliver(out.at(d), *t, v);
            continue;
        }

        detail::StepIo io = detail::step_io(step, inputs, snapshot);
        if (!topo) {
            require(sw != nullptr, ErrorKind::Simulation, "in-network plan needs its switch");
            require(step.epochs.size() == 1, ErrorKind::Simulation, "lone-switch step with several epochs");
            SwitchAssignment a = detail::route_or_throw(step.epochs[0].flows, *sw, -1);
            PortValues pv(sw->ports);
            for (const auto& [port, kv] : io.sent)
                pv[port] = kv.second;
            PortValues res = evaluate(a, pv);
            for (const auto& [port, k] : io.receiver) {
                require(res[port].has_value(), ErrorKind::Simulation,
                        "port " + std::to_string(port) + " received nothing");
                detail::deliver(out.at(port), step.transfers[k], *res[port]);
            }
            continue;
        }

        const auto& fs = topo->fabric();
        const int ns = static_cast<int>(fs.switches.size());
        std::vector<std::optional<SwitchAssignment>> asg(ns);
        for (const auto& e : step.epochs)
            asg[e.switch_index] = detail::route_or_throw(e.flows, fs.switches[e.switch_index].sw, e.switch_index);
        std::vector<PortValues> pin(ns), pout(ns);
        for (int s = 0; s < ns; ++s) {
            pin[s].assign(fs.switches[s].sw.ports, std::nullopt);
            pout[s].assign(fs.switches[s].sw.ports, std::nullopt);
        }
        for (const auto& [node, kv] : io.sent) {
            auto [leaf, port] = fabric_attachment(*topo, node);
            pin[leaf][port] = kv.second;
        }
        for (int iter = 0; iter < 4 * fs.levels + 4; ++iter) {
            for (int s = 0; s < ns; ++s)
                if (asg[s])
                    pout[s] = evaluate(*asg[s], pin[s]);
            bool changed = false;
            for (int s = 0; s < ns; ++s) {
                const auto& c = fs.switches[s];
                if (c.parent < 0)
                    continue;
                const auto& par = fs.switches[c.parent];
                const int pos =
                    static_cast<int>(std::find(par.children.begin(), par.children.end(), s) - par.children.begin());
                const int cb = par.child_port_base(pos, fs.switches), ub = c.uplink_port_base();
                for (int l = 0; l < c.uplink_lanes; ++l) {
                    if (pin[c.parent][cb + l] != pout[s][ub + l]) {
                        pin[c.parent][cb + l] = pout[s][ub + l];
                        changed = true;
                    }
                    if (pin[s][ub + l] != pout[c.parent][cb + l]) {
                        pin[s][ub + l] = pout[c.parent][cb + l];
                        changed = true;
                    }
                }
            }
            if (!changed && iter > 0)
                break;
        }
        for (const auto& [node, k] : io.receiver) {
            auto [leaf, port] = fabric_attachment(*topo, node);
            require(pout[leaf][port].has_value(), ErrorKind::Simulation,
                    "endpoint " + std::to_string(node) + " received nothing");
            detail::deliver(out.at(node), step.transfers[k], *pout[leaf][port]);
        }
    }
    return out;
}

/// Elementwise expected outputs; unset elements are unconstrained.
using Expectation = std::map<int, std::vector<std::optional<std::int64_t>>>;

inline Expectation reference_result(const CollectivePattern& pattern, const Buffers& in)
{
    const auto p = normalize_pattern(pattern);
    const auto& g = p.participants;
    const std::size_t n = g.size();
    const std::uint64_t d = p.bytes;
    Expectation e;
    auto blank = [&](int x) -> std::vector<std::optional<std::int64_t>>& {
        auto& v = e[x];
        if (v.empty())
            v.assign(d, std::nullopt);
        return v;
    };
    auto set = [&](int x, std::uint64_t off, const Vec& v) {
        auto& dst = blank(x);
        for (std::size_t i = 0; i < v.size(); ++i)
            dst[off + i] = v[i];
    };
    auto reduced = [&]() {
        std::optional<Vec> v;
        for (int x : g)
            v = combine_opt(p.op, v, in.at(x));
        return *v;
    };
    auto part = [&](const Vec& v, std::size_t j) {
        return detail::slice(v, shard_offset(0, d, n, j), shard_length(d, n, j));
    };
    switch (p.kind) {
    case CollectiveKind::Unicast:
    case CollectiveKind::Multicast:
        for (int x : p.targets)
            set(x, 0, in.at(g[0]));
        break;
    case CollectiveKind::Reduce: set(p.targets[0], 0, reduced()); break;
    case CollectiveKind::AllReduce:
        for (int x : g)
            set(x, 0, reduced());
        break;
    case CollectiveKind::AllReduceForward: {
        Vec r = reduced();
        for (int x : g)
            set(x, 0, r);
        for (int x : p.targets)
            set(x, 0, r);
        break;
    }
    case CollectiveKind::ReduceScatter: {
        Vec r = reduced();
        for (std::size_t j = 0; j < n; ++j)
            set(g[j], shard_offset(0, d, n, j), part(r, j));
        break;
    }
    case CollectiveKind::AllGather:
        for (int x : g)
            for (std::size_t j = 0; j < n; ++j)
                set(x, shard_offset(0, d, n, j), part(in.at(g[j]), j));
        break;
    case CollectiveKind::Scatter:
        for (std::size_t j = 0; j < n; ++j)
            set(g[j], shard_offset(0, d, n, j), part(in.at(p.targets[0]), j));
        break;
    case CollectiveKind::Gather:
        for (std::size_t j = 0; j < n; ++j)
            set(p.targets[0], shard_offset(0, d, n, j), part(in.at(g[j]), j));
        break;
    case CollectiveKind::AllToAll: {
        const std::uint64_t b = d / n;
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i)
                set(g[j], i * b, detail::slice(in.at(g[i]), j * b, b));
        break;
    }
    }
    return e;
}

/// Empty string when `got` satisfies `expected`, otherwise the first mismatch.
inline std::string check_result(const Expectation& expected, const Buffers& got)
{
    for (const auto& [x, v] : expected) {
        auto it = got.find(x);
        if (it == got.end())
            return "endpoint " + std::to_string(x) + " has no output";
        for (std::size_t i = 0; i < v.size(); ++i)
            if (v[i] && (i >= it->second.size() || it->second[i] != *v[i]))
                return "endpoint " + std::to_string(x) + " element " + std::to_string(i) + " wrong";
    }
    return {};
}

// ---------------------------------------------------------------------------
// Streaming trees

/// A link with the number of copies of one stream it carries.
struct WeightedLink {
    int link = -1;
    double weight = 1.0;
    bool operator==(const WeightedLink&) const = default;
};

namespace detail {

inline std::vector<WeightedLink> tally(const std::vector<int>& links)
{
    std::map<int, double> w;
    for (int l : links)
        w[l] += 1.0;
    std::vector<WeightedLink> out;
    for (auto [l, x] : w)
        out.push_back({l, x});
    return out;
}

} // namespace detail

/// Links a broadcast from `source` to `dests` loads.
/// Mesh: a forwarding tree that first runs perpendicular to the I/O
/// controller's border side, then spreads along the other dimension; each
/// link carries one copy. Fabric in-network: the switch tree, one copy per
/// link. Fabric endpoint: an NPU next to the source relays one copy to one
/// NPU under every other leaf, which forwards locally.
inline std::vector<WeightedLink> broadcast_tree(const Topology& t, int source, const std::vector<int>& dests,
                                                CollectiveMode mode)
{
    if (t.is_mesh()) {
        bool x_first = true;
        int root = source;
        std::vector<int> links;
        if (t.nodes[source].kind == NodeKind::IoController) {
            const Side s = t.nodes[source].side;
            x_first = s == Side::Left || s == Side::Right;
            root = t.nodes[source].attached_to;
            links.push_back(t.link_between(source, root));
        }
        for (int d : dests) {
            auto p = mesh_path(t, root, d, x_first);
            links.insert(links.end(), p.begin(), p.end());
        }
        std::sort(links.begin(), links.end());
        links.erase(std::unique(links.begin(), links.end()), links.end());
        return detail::tally(links);
    }
    if (mode == CollectiveMode::InNetwork) {
        LogicalFlow lf;
        lf.sources = {source};
        lf.destinations = dests;
        return detail::tally(realize_on_fabric(t, {lf}).links.front());
    }
    const auto& fs = t.fabric();
    std::map<int, std::vector<int>> by_leaf;
    for (int d : dests)
        by_leaf[fabric_attachment(t, d).first].push_back(d);
    const int src_leaf = fabric_attachment(t, source).first;
    // Hubs and relays rotate with the source so that concurrent broadcasts
    // from different channels fan out from different NPUs.
    std::size_t rot = static_cast<std::size_t>(source);
    if (t.nodes[source].kind == NodeKind::IoController)
        rot = static_cast<std::size_t>(std::find(t.io_nodes.begin(), t.io_nodes.end(), source) - t.io_nodes.begin());
    std::vector<int> links;
    int hub = source;
    if (t.nodes[source].kind != NodeKind::Npu) {
        // an I/O controller cannot forward; an NPU under its leaf does
        const auto& leaf = fs.switches[src_leaf];
        if (by_leaf.count(src_leaf))
            hub = by_leaf[src_leaf][rot % by_leaf[src_leaf].size()];
        else if (!leaf.npus.empty())
            hub = leaf.npus[rot % leaf.npus.size()];
        else {
            require(!by_leaf.empty(), ErrorKind::Config, "broadcast without destinations");
            hub = by_leaf.begin()->second[rot % by_leaf.begin()->second.size()];
        }
        auto p = endpoint_path(t, source, hub);
        links.insert(links.end(), p.begin(), p.end());
    }
    const int hub_leaf = fabric_attachment(t, hub).first;
    for (const auto& [leaf, members] : by_leaf) {
        int relay = leaf == hub_leaf ? hub : members[rot % members.size()];
        if (relay != hub) {
            auto p = endpoint_path(t, hub, relay);
            links.insert(links.end(), p.begin(), p.end());
        }
        for (int m : members)
            if (m != relay) {
                auto p = endpoint_path(t, relay, m);
                links.insert(links.end(), p.begin(), p.end());
            }
    }
    return detail::tally(links);
}

/// The reduction toward `sink` loads the reversed broadcast tree.
inline std::vector<WeightedLink> reduce_tree(const Topology& t, const std::vector<int>& sources, int sink,
                                             CollectiveMode mode)
{
    std::vector<WeightedLink> out;
    for (auto w : broadcast_tree(t, sink, sources, mode)) {
        const auto& l = t.links[w.link];
        out.push_back({t.link_between(l.dst, l.src), w.weight});
    }
    std::sort(out.begin(), out.end(), [](const WeightedLink& a, const WeightedLink& b) { return a.link < b.link; });
    return out;
}

} // namespace fred

#endif // FRED_COLLECTIVES_HPP
