#ifndef FRED_TOPOLOGY_HPP
#define FRED_TOPOLOGY_HPP

#include "fred/error.hpp"
#include "fred/switch.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace fred {

inline constexpr double GBps = 1e9;
inline constexpr double TBps = 1e12;
inline constexpr double default_hop_latency = 20e-9;

enum class NodeKind { Npu, IoController, Switch };

inline const char* to_string(NodeKind k) noexcept
{
    switch (k) {
    case NodeKind::Npu: return "NPU";
    case NodeKind::IoController: return "IOController";
    case NodeKind::Switch: return "Switch";
    }
    return "?";
}

/// Border side of a mesh NPU that an I/O controller is attached to.
enum class Side { Top, Left, Right, Bottom };

inline const char* to_string(Side s) noexcept
{
    switch (s) {
    case Side::Top: return "top";
    case Side::Left: return "left";
    case Side::Right: return "right";
    case Side::Bottom: return "bottom";
    }
    return "?";
}

struct Node {
    int id = -1;
    NodeKind kind = NodeKind::Npu;
    std::string name;
    int attached_to = -1; // IO controllers: the NPU (mesh) or leaf switch node (fabric)
    Side side = Side::Top; // mesh IO controllers only
    int switch_index = -1; // switch nodes: index into FabricStructure::switches
};

struct Link {
    int id = -1;
    int src = -1;
    int dst = -1;
    int src_port = -1; // switch port, -1 for endpoints
    int dst_port = -1;
    double bandwidth = 0.0; // bytes/s, per direction
    double latency = 0.0;   // seconds
    int lanes = 1;          // parallel switch ports bundled into this link
};

struct MeshStructure {
    int rows = 0;
    int cols = 0;
};

struct FabricSwitch {
    int node = -1;
    int level = 1; // 1 = leaf (L1)
    int parent = -1;
    std::vector<int> children;
    std::vector<int> npus; // node ids (== NPU ids)
    std::vector<int> ios;  // node ids
    int uplink_lanes = 0;
    double uplink_bandwidth = 0.0; // aggregate over lanes, per direction
    FredSwitch sw;

    int npu_port(int npu) const
    {
        auto it = std::find(npus.begin(), npus.end(), npu);
        return it == npus.end() ? -1 : static_cast<int>(it - npus.begin());
    }
    int io_port(int io) const
    {
        auto it = std::find(ios.begin(), ios.end(), io);
        return it == ios.end() ? -1 : static_cast<int>(npus.size() + (it - ios.begin()));
    }
    int child_port_base(int child_position, const std::vector<FabricSwitch>& all) const
    {
        int base = static_cast<int>(npus.size() + ios.size());
        for (int i = 0; i < child_position; ++i)
            base += all[children[i]].uplink_lanes;
        return base;
    }
    int uplink_port_base() const { return sw.ports - uplink_lanes; }
};

struct FabricStructure {
    std::vector<FabricSwitch> switches;
    int root = -1;
    int levels = 0;
    std::vector<int> leaf_of_npu; // NPU id -> switch index
};

class Topology {
public:
    std::vector<Node> nodes;
    std::vector<Link> links;
    std::variant<MeshStructure, FabricStructure> structure;
    int npu_count = 0;
    std::vector<int> io_nodes;
    double hop_latency = default_hop_latency;

    bool is_mesh() const noexcept { return std::holds_alternative<MeshStructure>(structure); }
    bool is_fabric() const noexcept { return std::holds_alternative<FabricStructure>(structure); }
    const MeshStructure& mesh() const { return std::get<MeshStructure>(structure); }
    const FabricStructure& fabric() const { return std::get<FabricStructure>(structure); }

    int link_between(int src, int dst) const
    {
        auto it = link_index_.find({src, dst});
        return it == link_index_.end() ? -1 : it->second;
    }

    const std::vector<int>& out_links(int node) const { return out_[node]; }

    int add_node(Node n)
    {
        n.id = static_cast<int>(nodes.size());
        nodes.push_back(std::move(n));
        out_.emplace_back();
        return nodes.back().id;
    }

    int add_link(int src, int dst, double bw, double latency, int lanes = 1, int src_port = -1, int dst_port = -1)
    {
        require(bw > 0.0, ErrorKind::Constraint, "link bandwidth must be positive");
        require(link_index_.count({src, dst}) == 0, ErrorKind::Constraint, "duplicate link");
        Link l;
        l.id = static_cast<int>(links.size());
        l.src = src;
        l.dst = dst;
        l.bandwidth = bw;
        l.latency = latency;
        l.lanes = lanes;
        l.src_port = src_port;
        l.dst_port = dst_port;
        links.push_back(l);
        out_[src].push_back(l.id);
        link_index_[{src, dst}] = l.id;
        return l.id;
    }

    void add_bidirectional(int a, int b, double bw, double latency, int lanes = 1, int a_port = -1, int b_port = -1)
    {
        add_link(a, b, bw, latency, lanes, a_port, b_port);
        add_link(b, a, bw, latency, lanes, b_port, a_port);
    }

    std::size_t npu_link_count() const
    {
        return static_cast<std::size_t>(std::count_if(links.begin(), links.end(), [&](const Link& l) {
            return nodes[l.src].kind == NodeKind::Npu && nodes[l.dst].kind == NodeKind::Npu;
        }));
    }

private:
    std::map<std::pair<int, int>, int> link_index_;
    std::vector<std::vector<int>> out_;
};

// ---------------------------------------------------------------------------
// 2D mesh

struct IoAttachment {
    int npu = -1;
    Side side = Side::Top;
};

inline int mesh_row(const MeshStructure& m, int npu) { return npu / m.cols; }
inline int mesh_col(const MeshStructure& m, int npu) { return npu % m.cols; }

inline bool on_side(int rows, int cols, int npu, Side s)
{
    int r = npu / cols, c = npu % cols;
    switch (s) {
    case Side::Top: return r == 0;
    case Side::Bottom: return r == rows - 1;
    case Side::Left: return c == 0;
    case Side::Right: return c == cols - 1;
    }
    return false;
}

/// One I/O controller per border side of each border NPU: corner NPUs get two.
inline std::vector<IoAttachment> border_io_attachments(int rows, int cols)
{
    std::vector<IoAttachment> out;
    for (int npu = 0; npu < rows * cols; ++npu)
        for (Side s : {Side::Top, Side::Left, Side::Right, Side::Bottom})
            if (on_side(rows, cols, npu, s))
                out.push_back({npu, s});
    return out;
}

inline Topology build_mesh(int rows, int cols, double link_bw, const std::vector<IoAttachment>& io_attachments,
                           double io_bw = 128 * GBps, double hop_latency = default_hop_latency)
{
    require(rows >= 1 && cols >= 1, ErrorKind::Constraint, "mesh needs rows, cols >= 1");
    Topology t;
    t.hop_latency = hop_latency;
    t.structure = MeshStructure{rows, cols};
    t.npu_count = rows * cols;
    for (int i = 0; i < rows * cols; ++i)
        t.add_node({-1, NodeKind::Npu, "npu" + std::to_string(i), -1, Side::Top, -1});
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            int n = r * cols + c;
            if (c + 1 < cols)
                t.add_bidirectional(n, n + 1, link_bw, hop_latency);
            if (r + 1 < rows)
                t.add_bidirectional(n, n + cols, link_bw, hop_latency);
        }
    for (const auto& io : io_attachments) {
        require(io.npu >= 0 && io.npu < rows * cols, ErrorKind::Constraint, "I/O attachment to unknown NPU");
        require(on_side(rows, cols, io.npu, io.side), ErrorKind::Constraint,
                "I/O attachment to NPU " + std::to_string(io.npu) + " which is not on the " + to_string(io.side) +
                    " border");
        int id = t.add_node({-1, NodeKind::IoController, "", io.npu, io.side, -1});
        t.nodes[id].name = "io" + std::to_string(t.io_nodes.size());
        t.io_nodes.push_back(id);
        t.add_bidirectional(id, io.npu, io_bw, hop_latency);
    }
    return t;
}

/// Dimension-ordered mesh path between NPUs as directed link ids.
inline std::vector<int> mesh_path(const Topology& t, int src, int dst, bool x_first = true)
{
    const auto& m = t.mesh();
    std::vector<int> path;
    int r = mesh_row(m, src), c = mesh_col(m, src);
    const int tr = mesh_row(m, dst), tc = mesh_col(m, dst);
    auto step = [&](int nr, int nc) {
        int from = r * m.cols + c, to = nr * m.cols + nc;
        path.push_back(t.link_between(from, to));
        r = nr;
        c = nc;
    };
    auto walk_x = [&] {
        while (c != tc)
            step(r, c + (tc > c ? 1 : -1));
    };
    auto walk_y = [&] {
        while (r != tr)
            step(r + (tr > r ? 1 : -1), c);
    };
    if (x_first) {
        walk_x();
        walk_y();
    } else {
        walk_y();
        walk_x();
    }
    return path;
}

// ---------------------------------------------------------------------------
// Hierarchical FRED fabric

struct FabricSwitchSpec {
    std::string name;
    int m = 3;
    int parent = -1;
    int uplink_lanes = 0;
    double uplink_bandwidth = 0.0; // aggregate, per direction
    std::vector<int> npus;
    int io_count = 0;
};

struct FabricSpec {
    std::vector<FabricSwitchSpec> switches;
    double npu_bandwidth = 3 * TBps;
    double io_bandwidth = 128 * GBps;
    double hop_latency = default_hop_latency;
    SwitchOptions switch_options;
};

inline Topology build_fred_fabric(const FabricSpec& spec)
{
    const int n_sw = static_cast<int>(spec.switches.size());
    require(n_sw >= 1, ErrorKind::Config, "fabric needs at least one switch");

    int root = -1;
    std::vector<std::vector<int>> children(n_sw);
    for (int i = 0; i < n_sw; ++i) {
        const auto& s = spec.switches[i];
        if (s.parent < 0) {
            require(root < 0, ErrorKind::Config,
                    "fabric is not a tree: switches " + std::to_string(root) + " and " + std::to_string(i) +
                        " both lack a parent");
            root = i;
        } else {
            require(s.parent < n_sw && s.parent != i, ErrorKind::Config,
                    "switch " + std::to_string(i) + " has invalid parent");
            children[s.parent].push_back(i);
        }
    }
    require(root >= 0, ErrorKind::Config, "fabric is not a tree: no root switch");
    for (int i = 0; i < n_sw; ++i) {
        int cur = i, steps = 0;
        while (cur != root) {
            cur = spec.switches[cur].parent;
            require(++steps <= n_sw, ErrorKind::Config, "fabric contains a cycle through switch " + std::to_string(i));
        }
    }

    int npu_total = 0;
    int io_total = 0;
    for (int i = 0; i < n_sw; ++i) {
        const auto& s = spec.switches[i];
        if (!children[i].empty())
            require(s.npus.empty() && s.io_count == 0, ErrorKind::Config,
                    "non-leaf switch " + std::to_string(i) + " may only attach switches");
        else
            require(!s.npus.empty() || s.io_count > 0, ErrorKind::Config,
                    "leaf switch " + std::to_string(i) + " attaches nothing");
        if (i != root)
            require(s.uplink_lanes >= 1 && s.uplink_bandwidth > 0.0, ErrorKind::Config,
                    "switch " + std::to_string(i) + " needs uplink lanes and bandwidth");
        else
            require(s.uplink_lanes == 0, ErrorKind::Config, "root switch cannot have uplinks");
        npu_total += static_cast<int>(s.npus.size());
        io_total += s.io_count;
    }
    std::vector<int> seen(npu_total, 0);
    for (const auto& s : spec.switches)
        for (int n : s.npus) {
            require(n >= 0 && n < npu_total && !seen[n], ErrorKind::Config,
                    "NPU ids must be 0..N-1, each attached once");
            seen[n] = 1;
        }

    Topology t;
    t.hop_latency = spec.hop_latency;
    t.npu_count = npu_total;
    for (int i = 0; i < npu_total; ++i)
        t.add_node({-1, NodeKind::Npu, "npu" + std::to_string(i), -1, Side::Top, -1});

    FabricStructure fs;
    fs.root = root;
    fs.switches.resize(n_sw);
    fs.leaf_of_npu.assign(npu_total, -1);
    for (int i = 0; i < n_sw; ++i) {
        auto& f = fs.switches[i];
        const auto& s = spec.switches[i];
        f.parent = s.parent;
        f.children = children[i];
        f.npus = s.npus;
        f.uplink_lanes = s.uplink_lanes;
        f.uplink_bandwidth = s.uplink_bandwidth;
        for (int n : s.npus)
            fs.leaf_of_npu[n] = i;
    }
    // IO ids follow NPUs, in switch order
    for (int i = 0; i < n_sw; ++i)
        for (int k = 0; k < spec.switches[i].io_count; ++k) {
            int id = t.add_node({-1, NodeKind::IoController, "io" + std::to_string(t.io_nodes.size()), -1,
                                 Side::Top, -1});
            t.io_nodes.push_back(id);
            fs.switches[i].ios.push_back(id);
        }
    for (int i = 0; i < n_sw; ++i) {
        std::string name = spec.switches[i].name.empty() ? "sw" + std::to_string(i) : spec.switches[i].name;
        fs.switches[i].node = t.add_node({-1, NodeKind::Switch, name, -1, Side::Top, i});
    }
    std::function<int(int)> level_of = [&](int i) {
        int lv = 1;
        for (int c : fs.switches[i].children)
            lv = std::max(lv, level_of(c) + 1);
        return lv;
    };
    for (int i = 0; i < n_sw; ++i) {
        auto& f = fs.switches[i];
        f.level = level_of(i);
        int ports = static_cast<int>(f.npus.size() + f.ios.size()) + f.uplink_lanes;
        for (int c : f.children)
            ports += spec.switches[c].uplink_lanes;
        require(ports >= 2, ErrorKind::Config, "switch " + std::to_string(i) + " has fewer than 2 ports");
        f.sw = build_fred_switch(spec.switches[i].m, ports, spec.switch_options);
    }
    fs.levels = fs.switches[root].level;

    for (int i = 0; i < n_sw; ++i) {
        const auto& f = fs.switches[i];
        for (int n : f.npus)
            t.add_bidirectional(n, f.node, spec.npu_bandwidth, spec.hop_latency, 1, -1, f.npu_port(n));
        for (int io : f.ios) {
            t.nodes[io].attached_to = f.node;
            t.add_bidirectional(io, f.node, spec.io_bandwidth, spec.hop_latency, 1, -1, f.io_port(io));
        }
    }
    for (int i = 0; i < n_sw; ++i) {
        const auto& f = fs.switches[i];
        for (std::size_t k = 0; k < f.children.size(); ++k) {
            const auto& c = fs.switches[f.children[k]];
            t.add_bidirectional(c.node, f.node, c.uplink_bandwidth, spec.hop_latency, c.uplink_lanes,
                                c.uplink_port_base(), f.child_port_base(static_cast<int>(k), fs.switches));
        }
    }
    t.structure = std::move(fs);
    return t;
}

/// Parent of a node in the fabric tree (NPU/IO -> leaf switch node,
/// switch -> parent switch node), -1 for the root.
inline int fabric_parent(const Topology& t, int node)
{
    const auto& fs = t.fabric();
    const auto& n = t.nodes[node];
    if (n.kind == NodeKind::Npu)
        return fs.switches[fs.leaf_of_npu[node]].node;
    if (n.kind == NodeKind::IoController)
        return n.attached_to;
    int p = fs.switches[n.switch_index].parent;
    return p < 0 ? -1 : fs.switches[p].node;
}

/// Directed links of the unique tree path src -> dst.
inline std::vector<int> fabric_path(const Topology& t, int src, int dst)
{
    std::vector<int> up_nodes{src}, down_nodes{dst};
    for (int p = fabric_parent(t, src); p >= 0; p = fabric_parent(t, p))
        up_nodes.push_back(p);
    for (int p = fabric_parent(t, dst); p >= 0; p = fabric_parent(t, p))
        down_nodes.push_back(p);
    // strip the common suffix above the lowest common ancestor
    while (up_nodes.size() >= 2 && down_nodes.size() >= 2 && up_nodes[up_nodes.size() - 2] == down_nodes[down_nodes.size() - 2]) {
        up_nodes.pop_back();
        down_nodes.pop_back();
    }
    std::vector<int> path;
    for (std::size_t i = 0; i + 1 < up_nodes.size(); ++i)
        path.push_back(t.link_between(up_nodes[i], up_nodes[i + 1]));
    for (std::size_t i = down_nodes.size() - 1; i > 0; --i)
        path.push_back(t.link_between(down_nodes[i], down_nodes[i - 1]));
    return path;
}

/// NPUs in fabric leaf order (DFS from the root, children in order).
inline std::vector<int> leaf_order(const Topology& t)
{
    std::vector<int> order;
    if (t.is_mesh()) {
        order.resize(t.npu_count);
        std::iota(order.begin(), order.end(), 0);
        return order;
    }
    const auto& fs = t.fabric();
    std::function<void(int)> walk = [&](int s) {
        for (int n : fs.switches[s].npus)
            order.push_back(n);
        for (int c : fs.switches[s].children)
            walk(c);
    };
    walk(fs.root);
    return order;
}

// ---------------------------------------------------------------------------
// Bisection bandwidth

inline bool npus_connected(const Topology& t)
{
    if (t.npu_count == 0)
        return false;
    std::vector<std::vector<int>> adj(t.nodes.size());
    for (const auto& l : t.links) {
        adj[l.src].push_back(l.dst);
        adj[l.dst].push_back(l.src);
    }
    std::vector<char> seen(t.nodes.size(), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    while (!q.empty()) {
        int v = q.front();
        q.pop();
        for (int w : adj[v])
            if (!seen[w]) {
                seen[w] = 1;
                q.push(w);
            }
    }
    for (int n = 0; n < t.npu_count; ++n)
        if (!seen[n])
            return false;
    return true;
}

namespace detail {

// Min cut over bipartitions of a tree that put exactly `k` NPUs on side S,
// computed bottom-up: cost[v][k][side of v].
// Per level of the tree, half the bandwidth crossing from that level to the
// next one up (NPU links count as level 0); the fabric's bisection is the
// smallest of these.
inline double tree_bisection(const Topology& t)
{
    const auto& fs = t.fabric();
    std::map<int, double> crossing;
    for (const auto& sw : fs.switches) {
        for (int n : sw.npus)
            crossing[0] += t.links[t.link_between(n, sw.node)].bandwidth;
        if (sw.parent >= 0)
            crossing[sw.level] += t.links[t.link_between(sw.node, fs.switches[sw.parent].node)].bandwidth;
    }
    double best = std::numeric_limits<double>::infinity();
    for (auto [level, bw] : crossing)
        best = std::min(best, bw / 2);
    return best;
}

} // namespace detail

inline double bisection_bandwidth(const Topology& t)
{
    require(npus_connected(t), ErrorKind::Constraint, "bisection of a disconnected topology");
    if (t.npu_count < 2)
        return 0.0;
    if (t.is_mesh()) {
        const auto& m = t.mesh();
        double bw = 0.0;
        for (const auto& l : t.links)
            if (t.nodes[l.src].kind == NodeKind::Npu && t.nodes[l.dst].kind == NodeKind::Npu) {
                bw = l.bandwidth;
                break;
            }
        // straight cut through the middle of an even dimension; odd x odd
        // meshes take the straight cut nearest the middle
        int best = std::numeric_limits<int>::max();
        if (m.rows % 2 == 0)
            best = std::min(best, m.cols);
        if (m.cols % 2 == 0)
            best = std::min(best, m.rows);
        if (best == std::numeric_limits<int>::max())
            best = std::min(m.rows > 1 ? m.cols : best, m.cols > 1 ? m.rows : best);
        return best * bw;
    }
    return detail::tree_bisection(t);
}

} // namespace fred

#endif // FRED_TOPOLOGY_HPP
