#ifndef FRED_PLACEMENT_HPP
#define FRED_PLACEMENT_HPP

// Worker-to-NPU placement and per-phase routing verification on FRED fabrics.

#include "fred/collectives.hpp"
#include "fred/routing.hpp"
#include "fred/topology.hpp"
#include "fred/workload.hpp"

#include <set>
#include <string>
#include <vector>

namespace fred {

struct Placement {
    ParallelStrategy strategy;
    std::vector<int> npu_of_worker; // by linear worker index
    std::vector<int> idle;          // NPUs without a worker, in placement order

    int npu(const WorkerId& w) const { return npu_of_worker.at(worker_index(strategy, w)); }

    std::vector<int> npus(const std::vector<WorkerId>& ws) const
    {
        std::vector<int> out;
        for (const auto& w : ws)
            out.push_back(npu(w));
        return out;
    }
};

/// Assigns worker (mp, dp, pp) to position mp + MP*pp + MP*PP*dp of `order`;
/// NPUs past the last worker stay idle.
inline Placement place_in_order(const ParallelStrategy& s, const std::vector<int>& order)
{
    auto check = validate_strategy(s, static_cast<int>(order.size()));
    require(check.ok, ErrorKind::Capacity, check.message);
    Placement p;
    p.strategy = s;
    p.npu_of_worker.assign(s.workers(), -1);
    for (int i = 0; i < s.workers(); ++i)
        p.npu_of_worker[i] = order[i];
    p.idle.assign(order.begin() + s.workers(), order.end());
    return p;
}

/// MP groups on consecutive NPUs in fabric leaf order, then PP, then DP.
inline Placement place_fred(const ParallelStrategy& s, const Topology& fabric)
{
    require(fabric.is_fabric(), ErrorKind::Config, "place_fred needs a FRED fabric");
    return place_in_order(s, leaf_order(fabric));
}

/// Row-major fill: MP groups contiguous, then PP, then DP.
inline Placement place_mesh_baseline(const ParallelStrategy& s, const Topology& mesh)
{
    require(mesh.is_mesh(), ErrorKind::Config, "place_mesh_baseline needs a 2D mesh");
    std::vector<int> order(mesh.npu_count);
    std::iota(order.begin(), order.end(), 0);
    return place_in_order(s, order);
}

inline Placement place(const ParallelStrategy& s, const Topology& t)
{
    return t.is_fabric() ? place_fred(s, t) : place_mesh_baseline(s, t);
}

inline bool placement_injective(const Placement& p)
{
    std::set<int> seen(p.idle.begin(), p.idle.end());
    if (seen.size() != p.idle.size())
        return false;
    for (int n : p.npu_of_worker)
        if (n < 0 || !seen.insert(n).second)
            return false;
    return true;
}

// ---------------------------------------------------------------------------
// Phase verification

enum class Phase { MP, DP, PPForward, PPBackward };

inline const char* to_string(Phase p) noexcept
{
    switch (p) {
    case Phase::MP: return "MP";
    case Phase::DP: return "DP";
    case Phase::PPForward: return "PP-fwd";
    case Phase::PPBackward: return "PP-bwd";
    }
    return "?";
}

struct PhaseReport {
    bool ok = true;
    Phase phase = Phase::MP;
    int switch_index = -1;
    std::optional<ConflictReport> conflict;
    std::string message;
};

/// Logical flows of one communication phase: every MP (or DP) group's
/// All-Reduce, or every stage-boundary multicast, all at once.
inline std::vector<LogicalFlow> phase_flows(const Placement& p, Phase phase)
{
    const auto& s = p.strategy;
    const Groups g = enumerate_groups(s);
    std::vector<LogicalFlow> flows;
    auto all_reduce = [&](const std::vector<WorkerId>& grp) {
        if (grp.size() < 2)
            return;
        LogicalFlow f;
        f.sources = p.npus(grp);
        std::sort(f.sources.begin(), f.sources.end());
        f.destinations = f.sources;
        f.length = 1;
        flows.push_back(f);
    };
    switch (phase) {
    case Phase::MP:
        for (const auto& grp : g.mp)
            all_reduce(grp);
        break;
    case Phase::DP:
        for (const auto& grp : g.dp)
            all_reduce(grp);
        break;
    case Phase::PPForward:
    case Phase::PPBackward:
        for (int d = 0; d < s.dp; ++d)
            for (int st = 0; st + 1 < s.pp; ++st) {
                const int from = phase == Phase::PPForward ? st : st + 1;
                const int to = phase == Phase::PPForward ? st + 1 : st;
                LogicalFlow f;
                f.sources = {p.npu(WorkerId{0, d, from})};
                f.destinations = p.npus(g.mp[mp_group_of(s, d, to)]);
                std::sort(f.destinations.begin(), f.destinations.end());
                f.length = 1;
                flows.push_back(f);
            }
        break;
    }
    return flows;
}

/// Realizes each phase's concurrent flows on the fabric and routes every
/// switch's epoch; the first conflict found is reported.
inline PhaseReport verify_conflict_free(const Placement& p, const Topology& fabric)
{
    require(fabric.is_fabric(), ErrorKind::Config, "verify_conflict_free needs a FRED fabric");
    const auto& fs = fabric.fabric();
    for (Phase ph : {Phase::MP, Phase::DP, Phase::PPForward, Phase::PPBackward}) {
        auto flows = phase_flows(p, ph);
        if (flows.empty())
            continue;
        FabricRealization r;
        try {
            r = realize_on_fabric(fabric, flows);
        } catch (const Error& e) {
            PhaseReport rep;
            rep.ok = false;
            rep.phase = ph;
            rep.message = e.what();
            return rep;
        }
        for (const auto& e : r.epochs) {
            RouteResult res = route(e.flows, fs.switches[e.switch_index].sw);
            if (!res.ok()) {
                PhaseReport rep;
                rep.ok = false;
                rep.phase = ph;
                rep.switch_index = e.switch_index;
                rep.conflict = res.conflict();
                rep.message = std::string(to_string(ph)) + " phase conflicts at switch " +
                              std::to_string(e.switch_index) + ": " + res.conflict().reason;
                return rep;
            }
        }
    }
    return {};
}

} // namespace fred

#endif // FRED_PLACEMENT_HPP
