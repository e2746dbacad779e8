#ifndef FRED_ROUTING_HPP
#define FRED_ROUTING_HPP

// Recursive conflict-graph routing of concurrent flows through a FRED switch.
//
// At every recursion level two flows that share an input or an output
// micro-switch must go through different middle subswitches. The conflict
// graph captures exactly that relation and a proper m-coloring of it picks a
// middle subswitch per flow. Each flow then continues, restricted to the
// micro-switch indices it touches, as a sub-flow of the chosen middle
// subswitch. A failure at any depth marks the whole epoch as conflicted.

#include "fred/error.hpp"
#include "fred/switch.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace fred {

enum class ReduceOp { Sum, Max, Min };

/// A routable unit: reduce the data of `inputs`, broadcast to `outputs`.
struct Flow {
    int id = 0;
    std::vector<int> inputs;
    std::vector<int> outputs;
    std::uint64_t payload_bytes = 0;
    ReduceOp op = ReduceOp::Sum;

    bool is_unicast() const noexcept { return inputs.size() == 1 && outputs.size() == 1; }
};

inline Flow make_flow(int id, std::vector<int> inputs, std::vector<int> outputs, std::uint64_t bytes = 0)
{
    Flow f;
    f.id = id;
    f.inputs = std::move(inputs);
    f.outputs = std::move(outputs);
    f.payload_bytes = bytes;
    return f;
}

/// Sorts/dedups port lists and checks the per-epoch invariants: port range,
/// non-empty sides, unique ids and port-disjointness across flows.
inline std::vector<Flow> normalize_epoch(std::vector<Flow> flows, int ports)
{
    std::set<int> ids;
    std::vector<int> in_owner(ports, -1), out_owner(ports, -1);
    for (auto& f : flows) {
        std::sort(f.inputs.begin(), f.inputs.end());
        f.inputs.erase(std::unique(f.inputs.begin(), f.inputs.end()), f.inputs.end());
        std::sort(f.outputs.begin(), f.outputs.end());
        f.outputs.erase(std::unique(f.outputs.begin(), f.outputs.end()), f.outputs.end());
        require(ids.insert(f.id).second, ErrorKind::InvalidEpoch, "duplicate flow id " + std::to_string(f.id));
        require(!f.inputs.empty() && !f.outputs.empty(), ErrorKind::InvalidEpoch,
                "flow " + std::to_string(f.id) + " needs at least one input and one output port");
        for (int p : f.inputs) {
            require(p >= 0 && p < ports, ErrorKind::InvalidEpoch,
                    "flow " + std::to_string(f.id) + " input port " + std::to_string(p) + " out of range");
            require(in_owner[p] < 0, ErrorKind::InvalidEpoch,
                    "input port " + std::to_string(p) + " shared by flows " + std::to_string(in_owner[p]) +
                        " and " + std::to_string(f.id));
            in_owner[p] = f.id;
        }
        for (int p : f.outputs) {
            require(p >= 0 && p < ports, ErrorKind::InvalidEpoch,
                    "flow " + std::to_string(f.id) + " output port " + std::to_string(p) + " out of range");
            require(out_owner[p] < 0, ErrorKind::InvalidEpoch,
                    "output port " + std::to_string(p) + " shared by flows " + std::to_string(out_owner[p]) +
                        " and " + std::to_string(f.id));
            out_owner[p] = f.id;
        }
    }
    return flows;
}

// ---------------------------------------------------------------------------
// Conflict graph and coloring

struct ConflictGraph {
    std::vector<int> nodes; // flow ids, ascending
    std::vector<std::pair<int, int>> edges; // (a, b) with a < b, sorted
    std::map<int, std::vector<int>> adjacency;

    int degree(int id) const
    {
        auto it = adjacency.find(id);
        return it == adjacency.end() ? 0 : static_cast<int>(it->second.size());
    }

    bool has_edge(int a, int b) const
    {
        if (a > b)
            std::swap(a, b);
        return std::binary_search(edges.begin(), edges.end(), std::make_pair(a, b));
    }

    std::string to_dot(const std::string& name = "conflicts") const
    {
        std::ostringstream os;
        os << "graph " << name << " {\n";
        for (int n : nodes)
            os << "  f" << n << ";\n";
        for (auto [a, b] : edges)
            os << "  f" << a << " -- f" << b << ";\n";
        os << "}\n";
        return os.str();
    }
};

/// Conflict graph at the outermost level of `sw`: flows are adjacent iff they
/// share an input or an output micro-switch. Base switches have no middle
/// stage and therefore no conflicts.
inline ConflictGraph build_conflict_graph(const std::vector<Flow>& flows, const FredSwitch& sw)
{
    auto epoch = normalize_epoch(flows, sw.ports);
    ConflictGraph g;
    for (const auto& f : epoch) {
        g.nodes.push_back(f.id);
        g.adjacency[f.id];
    }
    std::sort(g.nodes.begin(), g.nodes.end());
    if (sw.is_base())
        return g;

    const int r = sw.half();
    std::vector<std::vector<int>> in_users(r), out_users(r);
    for (const auto& f : epoch) {
        for (int p : f.inputs)
            if (int mu = sw.micro_of_port(p); mu >= 0)
                in_users[mu].push_back(f.id);
        for (int p : f.outputs)
            if (int mu = sw.micro_of_port(p); mu >= 0)
                out_users[mu].push_back(f.id);
    }
    std::set<std::pair<int, int>> edges;
    auto collect = [&](const std::vector<std::vector<int>>& users) {
        for (const auto& u : users)
            if (u.size() == 2 && u[0] != u[1])
                edges.insert({std::min(u[0], u[1]), std::max(u[0], u[1])});
    };
    collect(in_users);
    collect(out_users);
    g.edges.assign(edges.begin(), edges.end());
    for (auto [a, b] : g.edges) {
        g.adjacency[a].push_back(b);
        g.adjacency[b].push_back(a);
    }
    for (auto& [id, adj] : g.adjacency)
        std::sort(adj.begin(), adj.end());
    return g;
}

struct Coloring {
    bool success = false;
    std::map<int, int> colors; // flow id -> middle subswitch
    std::vector<int> residual; // flows left uncolored by the greedy pass
    bool exact_fallback = false;
};

namespace detail {

inline std::vector<int> degree_order(const ConflictGraph& g)
{
    std::vector<int> order = g.nodes;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        int da = g.degree(a), db = g.degree(b);
        return da != db ? da > db : a < b;
    });
    return order;
}

inline std::optional<std::map<int, int>> two_color(const ConflictGraph& g)
{
    std::map<int, int> col;
    for (int start : g.nodes) {
        if (col.count(start))
            continue;
        col[start] = 0;
        std::queue<int> q;
        q.push(start);
        while (!q.empty()) {
            int v = q.front();
            q.pop();
            for (int w : g.adjacency.at(v)) {
                auto it = col.find(w);
                if (it == col.end()) {
                    col[w] = 1 - col[v];
                    q.push(w);
                } else if (it->second == col[v]) {
                    return std::nullopt;
                }
            }
        }
    }
    return col;
}

// DSATUR-ordered backtracking with a node budget.
inline std::optional<std::map<int, int>> exact_color(const ConflictGraph& g, int k, long budget = 200000)
{
    std::map<int, int> col;
    long visited = 0;
    std::function<bool()> rec = [&]() -> bool {
        if (col.size() == g.nodes.size())
            return true;
        if (++visited > budget)
            return false;
        int pick = -1, best_sat = -1, best_deg = -1;
        for (int v : g.nodes) {
            if (col.count(v))
                continue;
            std::set<int> sat;
            for (int w : g.adjacency.at(v))
                if (auto it = col.find(w); it != col.end())
                    sat.insert(it->second);
            int s = static_cast<int>(sat.size()), d = g.degree(v);
            if (s > best_sat || (s == best_sat && d > best_deg)) {
                pick = v;
                best_sat = s;
                best_deg = d;
            }
        }
        for (int c = 0; c < k; ++c) {
            bool ok = true;
            for (int w : g.adjacency.at(pick))
                if (auto it = col.find(w); it != col.end() && it->second == c) {
                    ok = false;
                    break;
                }
            if (!ok)
                continue;
            col[pick] = c;
            if (rec())
                return true;
            col.erase(pick);
        }
        return false;
    };
    if (rec())
        return col;
    return std::nullopt;
}

} // namespace detail

/// Deterministic coloring: greedy largest-degree-first (ties by lowest id),
/// then an exact search when the greedy pass leaves flows uncolored. The
/// residual reported on failure is the greedy one.
inline Coloring color_graph(const ConflictGraph& g, int num_colors)
{
    require(num_colors >= 2, ErrorKind::Constraint, "coloring needs at least 2 colors");
    Coloring out;
    for (int v : detail::degree_order(g)) {
        std::vector<char> used(num_colors, 0);
        for (int w : g.adjacency.at(v))
            if (auto it = out.colors.find(w); it != out.colors.end())
                used[it->second] = 1;
        auto free = std::find(used.begin(), used.end(), 0);
        if (free == used.end())
            out.residual.push_back(v);
        else
            out.colors[v] = static_cast<int>(free - used.begin());
    }
    if (out.residual.empty()) {
        out.success = true;
        return out;
    }
    std::optional<std::map<int, int>> exact =
        num_colors == 2 ? detail::two_color(g) : detail::exact_color(g, num_colors);
    if (exact) {
        out.colors = *exact;
        out.residual.clear();
        out.success = true;
        out.exact_fallback = true;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Routing assignment

struct InputMicroConfig {
    int micro_id = -1;
    int index = 0;
    MicroSwitchKind kind = MicroSwitchKind::R;
    std::array<int, 2> flow{-1, -1};   // flow on each input port
    std::array<int, 2> middle{-1, -1}; // middle subswitch each port is switched to
    bool reduction_active = false;
    ReduceOp op = ReduceOp::Sum;
    bool operator==(const InputMicroConfig&) const = default;
};

struct OutputMicroConfig {
    int micro_id = -1;
    int index = 0;
    MicroSwitchKind kind = MicroSwitchKind::D;
    std::array<int, 2> flow{-1, -1};
    std::array<int, 2> middle{-1, -1}; // middle subswitch each output port listens to
    bool distribution_active = false;
    bool operator==(const OutputMicroConfig&) const = default;
};

struct AdapterSetting {
    int flow = -1;
    int middle = -1;
    bool operator==(const AdapterSetting&) const = default;
};

struct BaseRoute {
    int flow = -1;
    std::vector<int> inputs;
    ReduceOp op = ReduceOp::Sum;
    bool operator==(const BaseRoute&) const = default;
};

struct SwitchAssignment {
    int ports = 0;
    int m = 0;
    bool base = false;
    std::vector<int> path; // middle indices from the outermost level
    std::vector<InputMicroConfig> inputs;
    std::vector<OutputMicroConfig> outputs;
    std::optional<AdapterSetting> demux; // odd port, input side
    std::optional<AdapterSetting> mux;   // odd port, output side
    std::map<int, int> flow_color;
    std::vector<SwitchAssignment> middle;
    std::vector<std::optional<BaseRoute>> base_routes; // per output port

    bool operator==(const SwitchAssignment&) const = default;
};

struct ConflictReport {
    int depth = 0;
    std::vector<int> path;
    std::vector<int> flows;     // uncolored flows at the failing level
    std::vector<int> component; // flows connected to them in that level's graph
    ConflictGraph graph;
    int colors = 0;
    std::string reason;
};

class RouteResult {
public:
    RouteResult(SwitchAssignment a) : value_(std::move(a)) {}
    RouteResult(ConflictReport c) : value_(std::move(c)) {}

    bool ok() const noexcept { return std::holds_alternative<SwitchAssignment>(value_); }
    const SwitchAssignment& assignment() const { return std::get<SwitchAssignment>(value_); }
    const ConflictReport& conflict() const { return std::get<ConflictReport>(value_); }

private:
    std::variant<SwitchAssignment, ConflictReport> value_;
};

/// Pinned middle choices per level, mirroring the switch recursion.
struct ColorTree {
    std::map<int, int> colors;
    std::vector<ColorTree> middle;
};

/// The flow as seen by a middle subswitch: ports become micro-switch indices,
/// the odd port maps to the last middle port.
inline Flow restrict_to_middle(const Flow& f, const FredSwitch& sw)
{
    Flow sub = f;
    auto map_ports = [&](const std::vector<int>& ports) {
        std::set<int> out;
        for (int p : ports) {
            int mu = sw.micro_of_port(p);
            out.insert(mu < 0 ? sw.half() : mu);
        }
        return std::vector<int>(out.begin(), out.end());
    };
    sub.inputs = map_ports(f.inputs);
    sub.outputs = map_ports(f.outputs);
    return sub;
}

namespace detail {

inline SwitchAssignment empty_assignment(const FredSwitch& sw, const std::vector<int>& path)
{
    SwitchAssignment a;
    a.ports = sw.ports;
    a.m = sw.m;
    a.path = path;
    a.base = sw.is_base();
    if (a.base) {
        a.base_routes.resize(sw.ports);
        return a;
    }
    for (const auto& ms : sw.input_stage)
        a.inputs.push_back({ms.id, ms.index, ms.kind, {-1, -1}, {-1, -1}, false, ReduceOp::Sum});
    for (const auto& ms : sw.output_stage)
        a.outputs.push_back({ms.id, ms.index, ms.kind, {-1, -1}, {-1, -1}, false});
    for (int c = 0; c < sw.m; ++c) {
        auto p = path;
        p.push_back(c);
        a.middle.push_back(empty_assignment(sw.middle[c], p));
    }
    return a;
}

inline std::vector<int> component_of(const ConflictGraph& g, const std::vector<int>& seeds)
{
    std::set<int> seen(seeds.begin(), seeds.end());
    std::queue<int> q;
    for (int s : seeds)
        q.push(s);
    while (!q.empty()) {
        int v = q.front();
        q.pop();
        for (int w : g.adjacency.at(v))
            if (seen.insert(w).second)
                q.push(w);
    }
    return {seen.begin(), seen.end()};
}

inline RouteResult route_level(const FredSwitch& sw, const std::vector<Flow>& flows, const std::vector<int>& path,
                               const ColorTree* pinned)
{
    SwitchAssignment a = empty_assignment(sw, path);
    const int depth = static_cast<int>(path.size());

    if (sw.is_base()) {
        for (const auto& f : flows) {
            if (!sw.reduction_capable && (f.inputs.size() > 1 || f.outputs.size() > 1)) {
                ConflictReport rep;
                rep.depth = depth;
                rep.path = path;
                rep.flows = {f.id};
                rep.component = {f.id};
                rep.colors = sw.m;
                rep.reason = "reduction/distribution not available in middle stage";
                return rep;
            }
            for (int q : f.outputs)
                a.base_routes[q] = BaseRoute{f.id, f.inputs, f.op};
        }
        return a;
    }

    ConflictGraph g = build_conflict_graph(flows, sw);
    std::map<int, int> colors;
    if (pinned) {
        colors = pinned->colors;
        for (auto [x, y] : g.edges)
            require(colors.at(x) != colors.at(y), ErrorKind::Routing, "pinned coloring is not proper");
    } else {
        Coloring col = color_graph(g, sw.m);
        if (!col.success) {
            ConflictReport rep;
            rep.depth = depth;
            rep.path = path;
            rep.flows = col.residual;
            rep.component = component_of(g, col.residual);
            rep.graph = g;
            rep.colors = sw.m;
            rep.reason = "conflict graph is not " + std::to_string(sw.m) + "-colorable";
            return rep;
        }
        colors = col.colors;
    }
    a.flow_color = colors;

    for (const auto& f : flows) {
        if (!sw.reduction_capable && (f.inputs.size() > 1 || f.outputs.size() > 1)) {
            ConflictReport rep;
            rep.depth = depth;
            rep.path = path;
            rep.flows = {f.id};
            rep.component = {f.id};
            rep.graph = g;
            rep.colors = sw.m;
            rep.reason = "reduction/distribution not available in middle stage";
            return rep;
        }
        const int c = colors.at(f.id);
        for (int p : f.inputs) {
            int mu = sw.micro_of_port(p);
            if (mu < 0) {
                a.demux = AdapterSetting{f.id, c};
                continue;
            }
            auto& cfg = a.inputs[mu];
            cfg.flow[p % 2] = f.id;
            cfg.middle[p % 2] = c;
            cfg.op = f.op;
        }
        for (int p : f.outputs) {
            int mu = sw.micro_of_port(p);
            if (mu < 0) {
                a.mux = AdapterSetting{f.id, c};
                continue;
            }
            auto& cfg = a.outputs[mu];
            cfg.flow[p % 2] = f.id;
            cfg.middle[p % 2] = c;
        }
    }
    for (auto& cfg : a.inputs)
        cfg.reduction_active = cfg.flow[0] >= 0 && cfg.flow[0] == cfg.flow[1] && can_reduce(cfg.kind);
    for (auto& cfg : a.outputs)
        cfg.distribution_active = cfg.flow[0] >= 0 && cfg.flow[0] == cfg.flow[1] && can_distribute(cfg.kind);

    std::vector<std::vector<Flow>> sub(sw.m);
    for (const auto& f : flows)
        sub[colors.at(f.id)].push_back(restrict_to_middle(f, sw));
    for (int c = 0; c < sw.m; ++c) {
        auto p = path;
        p.push_back(c);
        const ColorTree* child = pinned && c < static_cast<int>(pinned->middle.size()) ? &pinned->middle[c] : nullptr;
        RouteResult r = route_level(sw.middle[c], sub[c], p, child);
        if (!r.ok())
            return r;
        a.middle[c] = r.assignment();
    }
    return a;
}

} // namespace detail

/// Routes one epoch of concurrent flows through `sw`.
inline RouteResult route(const std::vector<Flow>& flows, const FredSwitch& sw)
{
    auto epoch = normalize_epoch(flows, sw.ports);
    return detail::route_level(sw, epoch, {}, nullptr);
}

// ---------------------------------------------------------------------------
// Functional evaluation of an assignment

using Vec = std::vector<std::int64_t>;
using PortValues = std::vector<std::optional<Vec>>;

inline Vec combine(ReduceOp op, const Vec& a, const Vec& b)
{
    require(a.size() == b.size(), ErrorKind::Routing, "reduction of vectors with different lengths");
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        switch (op) {
        case ReduceOp::Sum: out[i] = a[i] + b[i]; break;
        case ReduceOp::Max: out[i] = std::max(a[i], b[i]); break;
        case ReduceOp::Min: out[i] = std::min(a[i], b[i]); break;
        }
    }
    return out;
}

inline std::optional<Vec> combine_opt(ReduceOp op, const std::optional<Vec>& a, const std::optional<Vec>& b)
{
    if (!a)
        return b;
    if (!b)
        return a;
    return combine(op, *a, *b);
}

namespace detail {

inline std::string path_string(const std::vector<int>& path)
{
    std::string s = "[";
    for (std::size_t i = 0; i < path.size(); ++i)
        s += (i ? "," : "") + std::to_string(path[i]);
    return s + "]";
}

} // namespace detail

/// Propagates per-port values through the configured micro-switches. Uses
/// only the switch settings, never the flow definitions.
inline PortValues evaluate(const SwitchAssignment& a, const PortValues& in)
{
    require(static_cast<int>(in.size()) == a.ports, ErrorKind::Routing, "port value count mismatch");
    PortValues out(a.ports);
    if (a.base) {
        for (int q = 0; q < a.ports; ++q) {
            if (!a.base_routes[q])
                continue;
            std::optional<Vec> v;
            for (int p : a.base_routes[q]->inputs)
                v = combine_opt(a.base_routes[q]->op, v, in[p]);
            out[q] = v;
        }
        return out;
    }

    const int r = a.ports / 2;
    const int sub_ports = a.ports % 2 ? r + 1 : r;
    std::vector<PortValues> mid_in(a.m, PortValues(sub_ports));
    for (const auto& cfg : a.inputs) {
        const int p0 = 2 * cfg.index;
        if (cfg.middle[0] >= 0 && cfg.middle[0] == cfg.middle[1]) {
            if (!cfg.reduction_active)
                throw Error(ErrorKind::Routing, "input micro-switch " + std::to_string(cfg.micro_id) + " at " +
                                                    detail::path_string(a.path) +
                                                    " sends both ports to one middle without reducing");
            mid_in[cfg.middle[0]][cfg.index] = combine_opt(cfg.op, in[p0], in[p0 + 1]);
            continue;
        }
        for (int k = 0; k < 2; ++k)
            if (cfg.middle[k] >= 0)
                mid_in[cfg.middle[k]][cfg.index] = in[p0 + k];
    }
    if (a.demux)
        mid_in[a.demux->middle][r] = in[a.ports - 1];

    std::vector<PortValues> mid_out(a.m);
    for (int c = 0; c < a.m; ++c)
        mid_out[c] = evaluate(a.middle[c], mid_in[c]);

    for (const auto& cfg : a.outputs) {
        const int q0 = 2 * cfg.index;
        if (cfg.middle[0] >= 0 && cfg.middle[0] == cfg.middle[1] && !cfg.distribution_active)
            throw Error(ErrorKind::Routing, "output micro-switch " + std::to_string(cfg.micro_id) + " at " +
                                                detail::path_string(a.path) +
                                                " feeds both ports from one middle without distributing");
        for (int k = 0; k < 2; ++k)
            if (cfg.middle[k] >= 0)
                out[q0 + k] = mid_out[cfg.middle[k]][cfg.index];
    }
    if (a.mux)
        out[a.ports - 1] = mid_out[a.mux->middle][r];
    return out;
}

struct ValidationResult {
    bool ok = true;
    std::string message;
};

/// Functional oracle: every output port of a flow must receive the reduction
/// of the flow's input vectors; ports outside every flow receive nothing.
inline ValidationResult validate_assignment(const SwitchAssignment& a, const std::vector<Flow>& flows,
                                            const FredSwitch& sw, const PortValues& test_vectors)
{
    if (a.ports != sw.ports)
        return {false, "assignment is for " + std::to_string(a.ports) + " ports, switch has " +
                           std::to_string(sw.ports)};
    PortValues got;
    try {
        got = evaluate(a, test_vectors);
    } catch (const Error& e) {
        return {false, e.what()};
    }
    std::vector<std::optional<Vec>> expected(sw.ports);
    for (const auto& f : flows) {
        std::optional<Vec> v;
        for (int p : f.inputs) {
            if (!test_vectors[p])
                return {false, "missing test vector for input port " + std::to_string(p)};
            v = combine_opt(f.op, v, test_vectors[p]);
        }
        for (int q : f.outputs)
            expected[q] = v;
    }
    for (int q = 0; q < sw.ports; ++q)
        if (got[q] != expected[q]) {
            std::ostringstream os;
            os << "output port " << q << (expected[q] ? " got wrong value" : " should be idle");
            return {false, os.str()};
        }
    return {};
}

inline std::string describe_assignment(const SwitchAssignment& a)
{
    std::ostringstream os;
    std::function<void(const SwitchAssignment&)> rec = [&](const SwitchAssignment& s) {
        const std::string at = detail::path_string(s.path);
        if (s.base) {
            for (int q = 0; q < s.ports; ++q)
                if (s.base_routes[q]) {
                    os << "base " << at << " out " << q << " <- flow " << s.base_routes[q]->flow << " in {";
                    for (std::size_t i = 0; i < s.base_routes[q]->inputs.size(); ++i)
                        os << (i ? "," : "") << s.base_routes[q]->inputs[i];
                    os << "}\n";
                }
            return;
        }
        for (auto [f, c] : s.flow_color)
            os << "level " << at << " flow " << f << " -> middle " << c << "\n";
        for (const auto& cfg : s.inputs)
            if (cfg.reduction_active)
                os << "level " << at << " input micro " << cfg.index << " R active (flow " << cfg.flow[0] << ")\n";
        for (const auto& cfg : s.outputs)
            if (cfg.distribution_active)
                os << "level " << at << " output micro " << cfg.index << " D active (flow " << cfg.flow[0] << ")\n";
        if (s.demux)
            os << "level " << at << " demux -> middle " << s.demux->middle << "\n";
        if (s.mux)
            os << "level " << at << " mux <- middle " << s.mux->middle << "\n";
        for (const auto& sub : s.middle)
            rec(sub);
    };
    rec(a);
    return os.str();
}

// ---------------------------------------------------------------------------
// Conflict resolution

enum class ResolveStrategy { Block, IncreaseM, Decompose, Placement };

struct BlockResolution {
    std::vector<std::vector<Flow>> epochs; // run serially, each routable
};

struct IncreaseMResolution {
    int m = 0;
    SwitchAssignment assignment;
};

struct DecomposeResolution {
    std::vector<int> decomposed;               // flow ids turned into endpoint unicasts
    std::vector<Flow> in_network;              // flows kept in-network
    std::vector<std::vector<Flow>> unicast_steps; // serial steps of unicasts
};

struct PlacementResolution {
    std::vector<int> conflicting; // handed to the placement module
};

using Resolution = std::variant<BlockResolution, IncreaseMResolution, DecomposeResolution, PlacementResolution>;

namespace detail {

// Unicast steps realizing one flow at the endpoints: a ring All-Reduce when
// inputs == outputs, otherwise a reduce chain followed by forwarding copies.
inline std::vector<std::vector<std::pair<int, int>>> endpoint_unicasts(const Flow& f)
{
    std::vector<std::vector<std::pair<int, int>>> steps;
    const auto& g = f.inputs;
    if (f.inputs == f.outputs && g.size() >= 2) {
        const int n = static_cast<int>(g.size());
        for (int s = 0; s < 2 * (n - 1); ++s) {
            std::vector<std::pair<int, int>> step;
            for (int i = 0; i < n; ++i)
                step.push_back({g[i], g[(i + 1) % n]});
            steps.push_back(step);
        }
        return steps;
    }
    for (std::size_t i = 0; i + 1 < g.size(); ++i)
        steps.push_back({{g[i], g[i + 1]}});
    for (int q : f.outputs)
        steps.push_back({{g.back(), q}});
    return steps;
}

} // namespace detail

inline Resolution resolve(const std::vector<Flow>& flows, const FredSwitch& sw, ResolveStrategy strategy,
                          int m_cap = 8)
{
    auto epoch = normalize_epoch(flows, sw.ports);
    switch (strategy) {
    case ResolveStrategy::Block: {
        BlockResolution out;
        std::vector<Flow> remaining = epoch;
        while (!remaining.empty()) {
            std::vector<Flow> current = remaining, blocked;
            for (;;) {
                RouteResult r = route(current, sw);
                if (r.ok())
                    break;
                const auto& rep = r.conflict();
                int victim = rep.flows.front();
                for (int id : rep.flows) {
                    int dv = rep.graph.degree(victim), di = rep.graph.degree(id);
                    if (di > dv || (di == dv && id < victim))
                        victim = id;
                }
                auto it = std::find_if(current.begin(), current.end(), [&](const Flow& f) { return f.id == victim; });
                blocked.push_back(*it);
                current.erase(it);
            }
            out.epochs.push_back(current);
            std::sort(blocked.begin(), blocked.end(), [](const Flow& a, const Flow& b) { return a.id < b.id; });
            remaining = blocked;
        }
        return out;
    }
    case ResolveStrategy::IncreaseM: {
        for (int m = sw.m; m <= m_cap; ++m) {
            FredSwitch bigger = build_fred_switch(m, sw.ports);
            RouteResult r = route(epoch, bigger);
            if (r.ok())
                return IncreaseMResolution{m, r.assignment()};
        }
        throw Error(ErrorKind::Routing, "no m <= " + std::to_string(m_cap) + " routes the epoch");
    }
    case ResolveStrategy::Decompose: {
        DecomposeResolution out;
        RouteResult r = route(epoch, sw);
        if (r.ok()) {
            out.in_network = epoch;
            return out;
        }
        std::set<int> bad(r.conflict().component.begin(), r.conflict().component.end());
        int next_id = 0;
        for (const auto& f : epoch)
            next_id = std::max(next_id, f.id + 1);
        for (const auto& f : epoch) {
            if (!bad.count(f.id)) {
                out.in_network.push_back(f);
                continue;
            }
            out.decomposed.push_back(f.id);
            auto steps = detail::endpoint_unicasts(f);
            if (out.unicast_steps.size() < steps.size())
                out.unicast_steps.resize(steps.size());
            for (std::size_t s = 0; s < steps.size(); ++s)
                for (auto [src, dst] : steps[s]) {
                    Flow u = make_flow(next_id++, {src}, {dst}, f.payload_bytes);
                    out.unicast_steps[s].push_back(u);
                }
        }
        return out;
    }
    case ResolveStrategy::Placement: {
        RouteResult r = route(epoch, sw);
        PlacementResolution out;
        if (!r.ok())
            out.conflicting = r.conflict().component;
        return out;
    }
    }
    throw Error(ErrorKind::Routing, "unknown strategy");
}

// ---------------------------------------------------------------------------
// Incremental routing without rearrangement

/// Adds flows one at a time, never moving flows that are already routed.
/// Each new flow takes the lowest middle subswitch that is free at its input
/// and output micro-switches and that admits its sub-flow recursively.
class IncrementalRouter {
public:
    explicit IncrementalRouter(FredSwitch sw) : sw_(std::move(sw)) { root_ = make_level(sw_); }

    IncrementalRouter(const IncrementalRouter&) = delete;
    IncrementalRouter& operator=(const IncrementalRouter&) = delete;

    const FredSwitch& fabric_switch() const noexcept { return sw_; }

    bool add(const Flow& flow)
    {
        Flow f = normalize_epoch({flow}, sw_.ports).front();
        if (root_.flows.count(f.id))
            return false;
        return add_rec(root_, f);
    }

    void remove(int id) { remove_rec(root_, id); }

    std::vector<Flow> flows() const
    {
        std::vector<Flow> out;
        for (const auto& [id, f] : root_.flows)
            out.push_back(f);
        return out;
    }

    SwitchAssignment assignment() const
    {
        ColorTree pinned = pins(root_);
        auto epoch = flows();
        RouteResult r = detail::route_level(sw_, epoch, {}, &pinned);
        return r.assignment();
    }

private:
    struct Level {
        const FredSwitch* sw = nullptr;
        std::map<int, Flow> flows;
        std::map<int, int> color;
        std::vector<Level> middle;
    };

    static Level make_level(const FredSwitch& sw)
    {
        Level l;
        l.sw = &sw;
        for (const auto& sub : sw.middle)
            l.middle.push_back(make_level(sub));
        return l;
    }

    static bool ports_free(const Level& l, const Flow& f)
    {
        for (const auto& [id, g] : l.flows) {
            for (int p : f.inputs)
                if (std::binary_search(g.inputs.begin(), g.inputs.end(), p))
                    return false;
            for (int p : f.outputs)
                if (std::binary_search(g.outputs.begin(), g.outputs.end(), p))
                    return false;
        }
        return true;
    }

    static bool shares_micro(const FredSwitch& sw, const Flow& a, const Flow& b)
    {
        auto share = [&](const std::vector<int>& x, const std::vector<int>& y) {
            for (int p : x) {
                int mu = sw.micro_of_port(p);
                if (mu < 0)
                    continue;
                for (int q : y)
                    if (sw.micro_of_port(q) == mu)
                        return true;
            }
            return false;
        };
        return share(a.inputs, b.inputs) || share(a.outputs, b.outputs);
    }

    static bool add_rec(Level& l, const Flow& f)
    {
        if (!ports_free(l, f))
            return false;
        const FredSwitch& sw = *l.sw;
        if (!sw.reduction_capable && (f.inputs.size() > 1 || f.outputs.size() > 1))
            return false;
        if (sw.is_base()) {
            l.flows[f.id] = f;
            return true;
        }
        Flow sub = restrict_to_middle(f, sw);
        for (int c = 0; c < sw.m; ++c) {
            bool blocked = false;
            for (const auto& [id, g] : l.flows)
                if (l.color.at(id) == c && shares_micro(sw, f, g)) {
                    blocked = true;
                    break;
                }
            if (blocked || !add_rec(l.middle[c], sub))
                continue;
            l.flows[f.id] = f;
            l.color[f.id] = c;
            return true;
        }
        return false;
    }

    static void remove_rec(Level& l, int id)
    {
        auto it = l.flows.find(id);
        if (it == l.flows.end())
            return;
        l.flows.erase(it);
        if (auto c = l.color.find(id); c != l.color.end()) {
            remove_rec(l.middle[c->second], id);
            l.color.erase(c);
        }
    }

    static ColorTree pins(const Level& l)
    {
        ColorTree t;
        t.colors = l.color;
        for (const auto& sub : l.middle)
            t.middle.push_back(pins(sub));
        return t;
    }

    FredSwitch sw_;
    Level root_;
};

} // namespace fred

#endif // FRED_ROUTING_HPP
