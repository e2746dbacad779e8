#ifndef FRED_SIM_HPP
#define FRED_SIM_HPP

// Flow-level, event-driven execution of task graphs over a topology with
// weighted max-min fair bandwidth sharing, plus static channel-load analysis.

#include "fred/collectives.hpp"
#include "fred/error.hpp"
#include "fred/placement.hpp"
#include "fred/topology.hpp"
#include "fred/workload.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <string>
#include <vector>

namespace fred {

/// One network stream: `bytes` crossing every link of `links` (weight =
/// copies carried), finishing hops * hop latency after its last byte leaves.
struct FlowSpec {
    std::vector<WeightedLink> links;
    double bytes = 0.0;
    int hops = 0;
    std::vector<int> injectors; // NPUs charged `bytes` each
};

/// Serial steps of concurrent flows.
using CommSteps = std::vector<std::vector<FlowSpec>>;

struct SimTask {
    bool comm = false;
    double duration = 0.0; // compute tasks
    CommSteps steps;       // comm tasks
    Category category = Category::Compute;
    std::string label;
};

struct RateSnapshot {
    double time = 0.0;
    std::vector<const std::vector<WeightedLink>*> flow_links;
    std::vector<double> rates;
    const std::vector<double>* capacity = nullptr;
};

struct TraceEvent {
    double time = 0.0;
    bool start = true;
    int flow = -1;
    int task = -1;
    double bytes = 0.0;
};

struct EngineOptions {
    bool trace = false;
    std::function<void(const RateSnapshot&)> on_rates;
    std::vector<int> window_ends; // tasks whose completion closes an accounting window
};

struct Window {
    double start = 0.0;
    double end = 0.0;
    std::array<double, category_count> busy{};
    double idle = 0.0;
};

struct EngineResult {
    double makespan = 0.0;
    std::array<double, category_count> busy{}; // compute, then exposed comm by category
    double idle = 0.0;
    std::vector<double> task_finish;
    std::vector<double> link_bytes;
    std::vector<double> link_peak; // peak fraction of capacity
    std::map<int, double> injected;
    std::vector<TraceEvent> trace;
    std::vector<Window> windows; // window_ends.size() + 1 entries
};

/// Weighted progressive filling: all unfrozen flows grow at the same pace
/// until a link saturates; flows on saturated links freeze.
inline std::vector<double> max_min_rates(const std::vector<const std::vector<WeightedLink>*>& flows,
                                         const std::vector<double>& capacity)
{
    std::vector<double> rate(flows.size(), 0.0);
    std::vector<double> rem = capacity;
    std::vector<char> frozen(flows.size(), 0);
    std::vector<int> used;
    std::vector<char> is_used(capacity.size(), 0);
    std::size_t unfrozen = 0;
    for (std::size_t f = 0; f < flows.size(); ++f) {
        if (flows[f]->empty()) {
            frozen[f] = 1;
            rate[f] = std::numeric_limits<double>::infinity();
            continue;
        }
        ++unfrozen;
        for (const auto& wl : *flows[f])
            if (!is_used[wl.link]) {
                is_used[wl.link] = 1;
                used.push_back(wl.link);
            }
    }
    std::sort(used.begin(), used.end());
    std::vector<double> sumw(capacity.size(), 0.0);
    while (unfrozen > 0) {
        for (int l : used)
            sumw[l] = 0.0;
        for (std::size_t f = 0; f < flows.size(); ++f)
            if (!frozen[f])
                for (const auto& wl : *flows[f])
                    sumw[wl.link] += wl.weight;
        double delta = std::numeric_limits<double>::infinity();
        for (int l : used)
            if (sumw[l] > 0.0)
                delta = std::min(delta, std::max(0.0, rem[l]) / sumw[l]);
        for (std::size_t f = 0; f < flows.size(); ++f)
            if (!frozen[f])
                rate[f] += delta;
        std::vector<char> saturated(capacity.size(), 0);
        for (int l : used)
            if (sumw[l] > 0.0) {
                rem[l] -= delta * sumw[l];
                if (rem[l] <= 1e-12 * capacity[l])
                    saturated[l] = 1;
            }
        for (std::size_t f = 0; f < flows.size(); ++f) {
            if (frozen[f])
                continue;
            for (const auto& wl : *flows[f])
                if (saturated[wl.link]) {
                    frozen[f] = 1;
                    --unfrozen;
                    break;
                }
        }
    }
    return rate;
}

class FlowEngine {
public:
    FlowEngine(const Topology& t) : topo_(t)
    {
        for (const auto& l : t.links)
            capacity_.push_back(l.bandwidth);
    }

    EngineResult run(const std::vector<SimTask>& tasks, const std::vector<std::pair<int, int>>& edges,
                     const EngineOptions& opts = {})
    {
        const int n = static_cast<int>(tasks.size());
        EngineResult res;
        res.task_finish.assign(n, -1.0);
        res.link_bytes.assign(capacity_.size(), 0.0);
        res.link_peak.assign(capacity_.size(), 0.0);

        std::vector<int> indeg(n, 0);
        std::vector<std::vector<int>> succ(n);
        for (auto [a, b] : edges) {
            require(a >= 0 && a < n && b >= 0 && b < n, ErrorKind::Simulation, "edge references unknown task");
            succ[a].push_back(b);
            ++indeg[b];
        }
        struct Active {
            int id;
            int task;
            const FlowSpec* spec;
            double remaining;
            double rate;
        };
        struct Event {
            double time;
            long seq;
            int kind; // 0 compute done, 1 flow done
            int id;   // task for compute, task for flow
            const FlowSpec* spec;
            bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
        };
        std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
        std::vector<Active> active;
        std::vector<int> step(n, 0), outstanding(n, 0);
        std::array<int, category_count> running{};
        std::vector<int> ready;
        for (int i = 0; i < n; ++i)
            if (indeg[i] == 0)
                ready.push_back(i);
        std::vector<char> closes(n, 0);
        for (int w : opts.window_ends) {
            require(w >= 0 && w < n, ErrorKind::Simulation, "window end references unknown task");
            closes[w] = 1;
        }
        res.windows.assign(opts.window_ends.size() + 1, Window{});
        std::size_t window = 0;
        double now = 0.0;
        long seq = 0;
        int next_flow = 0;
        int finished = 0;
        bool dirty = false;

        auto finish_task = [&](int i) {
            res.task_finish[i] = now;
            ++finished;
            if (closes[i] && window + 1 < res.windows.size()) {
                res.windows[window].end = now;
                res.windows[++window].start = now;
            }
            for (int s : succ[i])
                if (--indeg[s] == 0)
                    ready.push_back(s);
        };
        // Starts the first step at or after k that has network traffic.
        auto start_step = [&](int i, int k) {
            const auto& steps = tasks[i].steps;
            for (; k < static_cast<int>(steps.size()); ++k) {
                int created = 0;
                for (const auto& f : steps[k]) {
                    if (f.bytes <= 0.0)
                        continue;
                    if (f.links.empty())
                        continue; // local
                    active.push_back({next_flow, i, &f, f.bytes, 0.0});
                    if (opts.trace)
                        res.trace.push_back({now, true, next_flow, i, f.bytes});
                    ++next_flow;
                    ++created;
                }
                if (created > 0) {
                    step[i] = k;
                    outstanding[i] = created;
                    dirty = true;
                    return;
                }
            }
            --running[static_cast<int>(tasks[i].category)];
            finish_task(i);
        };
        auto flow_done = [&](int task, const FlowSpec* f) {
            for (int inj : f->injectors)
                res.injected[inj] += f->bytes;
            if (--outstanding[task] == 0)
                start_step(task, step[task] + 1);
        };

        while (true) {
            while (!ready.empty()) {
                std::sort(ready.begin(), ready.end());
                std::vector<int> batch;
                batch.swap(ready);
                for (int i : batch) {
                    const auto& t = tasks[i];
                    if (!t.comm) {
                        if (t.duration <= 0.0) {
                            finish_task(i);
                        } else {
                            ++running[0];
                            events.push({now + t.duration, seq++, 0, i, nullptr});
                        }
                    } else {
                        ++running[static_cast<int>(t.category)];
                        start_step(i, 0);
                    }
                }
            }
            if (active.empty() && events.empty())
                break;
            if (dirty) {
                std::vector<const std::vector<WeightedLink>*> fl;
                for (const auto& a : active)
                    fl.push_back(&a.spec->links);
                auto rates = max_min_rates(fl, capacity_);
                std::vector<double> load(capacity_.size(), 0.0);
                for (std::size_t k = 0; k < active.size(); ++k) {
                    active[k].rate = rates[k];
                    for (const auto& wl : active[k].spec->links)
                        load[wl.link] += wl.weight * rates[k];
                }
                for (std::size_t l = 0; l < load.size(); ++l)
                    res.link_peak[l] = std::max(res.link_peak[l], load[l] / capacity_[l]);
                if (opts.on_rates)
                    opts.on_rates(RateSnapshot{now, fl, rates, &capacity_});
                dirty = false;
            }
            double t_next = events.empty() ? std::numeric_limits<double>::infinity() : events.top().time;
            for (const auto& a : active)
                if (a.rate > 0.0)
                    t_next = std::min(t_next, now + a.remaining / a.rate);
            require(std::isfinite(t_next), ErrorKind::Simulation, "simulation stalled with pending flows");
            const double dt = t_next - now;
            if (dt > 0.0) {
                auto& win = res.windows[window];
                if (running[0] > 0) {
                    win.busy[0] += dt;
                } else {
                    int cats = 0;
                    for (int c = 1; c < category_count; ++c)
                        cats += running[c] > 0;
                    if (cats == 0)
                        win.idle += dt;
                    else
                        for (int c = 1; c < category_count; ++c)
                            if (running[c] > 0)
                                win.busy[c] += dt / cats;
                }
                for (auto& a : active) {
                    const double moved = std::min(a.remaining, a.rate * dt);
                    a.remaining -= moved;
                    for (const auto& wl : a.spec->links)
                        res.link_bytes[wl.link] += wl.weight * moved;
                }
            }
            now = t_next;
            std::vector<Active> drained;
            for (std::size_t k = 0; k < active.size();) {
                auto& a = active[k];
                if (a.remaining <= 1e-9 * a.spec->bytes + 1e-9 ||
                    (a.rate > 0.0 && now + a.remaining / a.rate <= now)) {
                    drained.push_back(a);
                    active.erase(active.begin() + static_cast<std::ptrdiff_t>(k));
                    dirty = true;
                } else {
                    ++k;
                }
            }
            for (const auto& a : drained) {
                const double lat = a.spec->hops * topo_.hop_latency;
                if (opts.trace)
                    res.trace.push_back({now + lat, false, a.id, a.task, a.spec->bytes});
                events.push({now + lat, seq++, 1, a.task, a.spec});
            }
            while (!events.empty() && events.top().time <= now) {
                Event e = events.top();
                events.pop();
                if (e.kind == 0) {
                    --running[0];
                    finish_task(e.id);
                } else {
                    flow_done(e.id, e.spec);
                }
            }
        }
        require(finished == n, ErrorKind::Simulation,
                "task graph did not complete: " + std::to_string(n - finished) + " task(s) never became ready");
        res.makespan = now;
        res.windows[window].end = now;
        for (const auto& w : res.windows) {
            for (int c = 0; c < category_count; ++c)
                res.busy[c] += w.busy[c];
            res.idle += w.idle;
        }
        return res;
    }

    const std::vector<double>& capacity() const noexcept { return capacity_; }

private:
    const Topology& topo_;
    std::vector<double> capacity_;
};

// ---------------------------------------------------------------------------
// From plans and tasks to flows

inline std::vector<WeightedLink> unit_links(const std::vector<int>& links)
{
    std::vector<WeightedLink> out;
    for (int l : links)
        out.push_back({l, 1.0});
    return out;
}

inline CommSteps plan_to_steps(const CollectivePlan& plan, const Topology& t)
{
    auto injectors = [&](const std::vector<int>& src) {
        std::vector<int> v;
        for (int s : src)
            if (s < static_cast<int>(t.nodes.size()) && t.nodes[s].kind == NodeKind::Npu)
                v.push_back(s);
        return v;
    };
    CommSteps out;
    if (plan.pipelined) {
        // every step streams at once; identical routes are merged
        std::map<std::pair<std::vector<int>, std::vector<int>>, FlowSpec> merged;
        for (const auto& s : plan.steps)
            for (const auto& tr : s.transfers) {
                if (tr.length == 0)
                    continue;
                auto& f = merged[{tr.links, tr.sources}];
                if (f.links.empty()) {
                    f.links = unit_links(tr.links);
                    f.injectors = injectors(tr.sources);
                }
                f.bytes += static_cast<double>(tr.length);
                f.hops = std::max(f.hops, tr.hops);
            }
        std::vector<FlowSpec> step;
        for (auto& [k, f] : merged)
            step.push_back(f);
        out.push_back(step);
        return out;
    }
    for (const auto& s : plan.steps) {
        std::vector<FlowSpec> step;
        for (const auto& tr : s.transfers) {
            if (tr.length == 0)
                continue;
            FlowSpec f;
            f.links = unit_links(tr.links);
            f.bytes = static_cast<double>(tr.length);
            f.hops = tr.hops;
            f.injectors = injectors(tr.sources);
            step.push_back(f);
        }
        out.push_back(step);
    }
    return out;
}

struct SimParams {
    CollectiveMode mode = CollectiveMode::Endpoint;
    bool trace = false;
    std::function<void(const RateSnapshot&)> on_rates;
    std::string platform;
    std::string workload;
    std::uint64_t seed = 0;
};

/// Converts graph tasks to flow steps on `t` under `p`.
class TaskCompiler {
public:
    TaskCompiler(const Topology& t, const Placement& p, CollectiveMode mode) : t_(t), p_(p), mode_(mode)
    {
        if (t.is_mesh())
            mode_ = CollectiveMode::Endpoint;
    }

    SimTask compile(const Task& task)
    {
        SimTask s;
        s.category = task.category;
        s.label = task.label;
        if (task.kind == TaskKind::Compute) {
            s.duration = task.duration;
            return s;
        }
        s.comm = true;
        if (task.bytes == 0)
            return s;
        std::vector<int> npus;
        for (int w : task.workers)
            npus.push_back(p_.npu_of_worker.at(w));
        std::sort(npus.begin(), npus.end());
        switch (task.kind) {
        case TaskKind::Collective: {
            if (npus.size() < 2)
                return s;
            CollectivePattern pat;
            pat.kind = task.pattern;
            pat.participants = npus;
            pat.bytes = task.bytes;
            if (pat.kind == CollectiveKind::Reduce || pat.kind == CollectiveKind::Scatter ||
                pat.kind == CollectiveKind::Gather)
                pat.targets = {npus.front()};
            s.steps = steps_for(pat);
            return s;
        }
        case TaskKind::PPTransfer: {
            const int root = p_.npu_of_worker.at(task.root);
            CollectivePattern pat;
            pat.kind = CollectiveKind::Multicast;
            pat.participants = {root};
            for (int x : npus)
                if (x != root)
                    pat.targets.push_back(x);
            pat.bytes = task.bytes;
            if (!pat.targets.empty())
                s.steps = steps_for(pat);
            return s;
        }
        case TaskKind::InputLoad: {
            require(!t_.io_nodes.empty(), ErrorKind::Simulation, "input load without I/O controllers");
            const int io = t_.io_nodes[task.io_channel % static_cast<int>(t_.io_nodes.size())];
            FlowSpec f;
            f.links = broadcast_tree(t_, io, npus, mode_);
            f.bytes = static_cast<double>(task.bytes);
            f.hops = hops_of(f.links);
            s.steps.push_back({f});
            return s;
        }
        case TaskKind::WeightStreamLoad:
        case TaskKind::GradientStreamReduce: {
            require(!t_.io_nodes.empty(), ErrorKind::Simulation, "weight streaming without I/O controllers");
            const auto n_io = t_.io_nodes.size();
            std::vector<FlowSpec> step;
            for (std::size_t c = 0; c < n_io; ++c) {
                FlowSpec f;
                f.links = task.kind == TaskKind::WeightStreamLoad ? tree(t_.io_nodes[c], npus, false)
                                                                  : tree(t_.io_nodes[c], npus, true);
                f.bytes = static_cast<double>(task.bytes / n_io + (c + 1 == n_io ? task.bytes % n_io : 0));
                f.hops = hops_of(f.links);
                if (task.kind == TaskKind::GradientStreamReduce)
                    f.injectors = npus;
                step.push_back(f);
            }
            s.steps.push_back(step);
            return s;
        }
        case TaskKind::Compute: break;
        }
        return s;
    }

    CollectiveMode mode() const noexcept { return mode_; }

private:
    // longest root-to-leaf link count of a tree given as a link set
    int hops_of(const std::vector<WeightedLink>& links) const
    {
        std::map<int, std::vector<int>> out;
        std::map<int, int> indeg;
        for (const auto& wl : links) {
            const auto& l = t_.links[wl.link];
            out[l.src].push_back(l.dst);
            ++indeg[l.dst];
        }
        int best = 0;
        std::vector<std::pair<int, int>> stack;
        for (const auto& [n, v] : out)
            if (!indeg.count(n))
                stack.push_back({n, 0});
        std::set<int> seen;
        while (!stack.empty()) {
            auto [n, d] = stack.back();
            stack.pop_back();
            best = std::max(best, d);
            if (!seen.insert(n).second)
                continue;
            auto it = out.find(n);
            if (it != out.end())
                for (int m : it->second)
                    stack.push_back({m, d + 1});
        }
        return best;
    }

    const std::vector<WeightedLink>& tree(int io, const std::vector<int>& npus, bool reverse)
    {
        auto key = std::make_tuple(io, npus, reverse);
        auto it = tree_cache_.find(key);
        if (it != tree_cache_.end())
            return it->second;
        auto links = reverse ? reduce_tree(t_, npus, io, mode_) : broadcast_tree(t_, io, npus, mode_);
        return tree_cache_.emplace(key, std::move(links)).first->second;
    }

    const CommSteps& steps_for(const CollectivePattern& pat)
    {
        auto key = std::make_tuple(static_cast<int>(pat.kind), pat.participants, pat.targets, pat.bytes);
        auto it = cache_.find(key);
        if (it != cache_.end())
            return it->second;
        CollectivePlan plan = plan_collective(pat, t_, mode_);
        return cache_.emplace(key, plan_to_steps(plan, t_)).first->second;
    }

    const Topology& t_;
    const Placement& p_;
    CollectiveMode mode_;
    std::map<std::tuple<int, std::vector<int>, std::vector<int>, std::uint64_t>, CommSteps> cache_;
    std::map<std::tuple<int, std::vector<int>, bool>, std::vector<WeightedLink>> tree_cache_;
};

// ---------------------------------------------------------------------------
// Reports

struct LinkUtilization {
    int link = -1;
    double peak = 0.0;
    double mean = 0.0;
};

struct SimReport {
    std::string platform;
    std::string workload;
    std::string strategy;
    std::string mode;
    std::uint64_t seed = 0;
    int iterations = 1;
    double total = 0.0; // last iteration
    double compute = 0.0;
    double idle = 0.0;
    std::array<double, category_count> exposed{}; // index 0 unused
    std::vector<LinkUtilization> links;
    std::map<int, double> npu_injected; // mean per iteration
    std::vector<TraceEvent> trace;

    double exposed_of(Category c) const { return exposed[static_cast<int>(c)]; }
};

/// Runs the graph and reports the last iteration. Exposed time of a
/// category accrues while none of the graph's compute runs, shared evenly
/// between the comm categories in flight at that moment.
inline SimReport simulate(const IterationGraph& g, const Topology& t, const Placement& p, const SimParams& params)
{
    require(p.strategy == g.strategy, ErrorKind::Simulation, "placement strategy differs from the graph's");
    TaskCompiler compiler(t, p, params.mode);
    std::vector<SimTask> tasks;
    tasks.reserve(g.tasks.size());
    for (const auto& task : g.tasks) {
        try {
            tasks.push_back(compiler.compile(task));
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Routing || e.kind() == ErrorKind::Capacity)
                throw Error(ErrorKind::Simulation, "task '" + task.label + "': " + e.what());
            throw;
        }
    }
    FlowEngine engine(t);
    EngineOptions opts;
    opts.trace = params.trace;
    opts.on_rates = params.on_rates;
    opts.window_ends = g.barriers;
    EngineResult r = engine.run(tasks, g.edges, opts);

    SimReport rep;
    rep.platform = params.platform;
    rep.workload = params.workload;
    rep.strategy = g.strategy.name();
    rep.mode = to_string(compiler.mode());
    rep.seed = params.seed;
    rep.iterations = g.iterations;
    // the last iteration is reported; earlier ones warm up prefetching
    const Window& w = g.barriers.empty() ? r.windows.back() : r.windows[g.barriers.size() - 1];
    rep.total = w.end - w.start;
    rep.compute = w.busy[0];
    rep.idle = w.idle;
    for (int c = 1; c < category_count; ++c)
        rep.exposed[c] = w.busy[c];
    const double it = static_cast<double>(g.iterations);
    for (std::size_t l = 0; l < t.links.size(); ++l) {
        LinkUtilization u;
        u.link = static_cast<int>(l);
        u.peak = r.link_peak[l];
        u.mean = r.makespan > 0.0 ? r.link_bytes[l] / (t.links[l].bandwidth * r.makespan) : 0.0;
        rep.links.push_back(u);
    }
    for (int n = 0; n < t.npu_count; ++n)
        rep.npu_injected[n] = 0.0;
    for (auto [n, b] : r.injected)
        rep.npu_injected[n] = b / it;
    rep.trace = std::move(r.trace);
    return rep;
}

// ---------------------------------------------------------------------------
// Single-collective measurements

struct EffectiveBandwidth {
    double time = 0.0;          // collective completion time
    double mean_injected = 0.0; // bytes per participating NPU
    double per_npu = 0.0;       // bytes/s
};

/// Injected bytes per NPU divided by completion time, averaged over the
/// plan's NPUs, with the plan simulated alone on `t`.
inline EffectiveBandwidth effective_npu_bandwidth(const CollectivePlan& plan, const Topology& t)
{
    SimTask task;
    task.comm = true;
    task.category = Category::MP;
    task.steps = plan_to_steps(plan, t);
    FlowEngine engine(t);
    EngineResult r = engine.run({task}, {});
    EffectiveBandwidth e;
    e.time = r.makespan;
    auto inj = injected_traffic(plan);
    double sum = 0.0;
    int n = 0;
    for (auto [node, b] : inj)
        if (t.nodes[node].kind == NodeKind::Npu) {
            sum += static_cast<double>(b);
            ++n;
        }
    e.mean_injected = n ? sum / n : 0.0;
    e.per_npu = e.time > 0.0 ? e.mean_injected / e.time : 0.0;
    return e;
}

// ---------------------------------------------------------------------------
// Static channel load

struct Demand {
    int source = -1;
    std::vector<int> destinations;
    double rate = 0.0;
};

struct ChannelLoad {
    std::vector<double> load; // per link, bytes/s
    int hotspot_link = -1;
    double max_load = 0.0;
    double hotspot_factor = 0.0; // max_load / channel_rate
};

inline ChannelLoad max_channel_load(const std::vector<Demand>& demands, const Topology& t, CollectiveMode mode,
                                    double channel_rate)
{
    require(channel_rate > 0.0, ErrorKind::Config, "channel rate must be positive");
    ChannelLoad out;
    out.load.assign(t.links.size(), 0.0);
    for (const auto& d : demands) {
        std::vector<WeightedLink> links;
        if (d.destinations.size() == 1 && t.nodes[d.source].kind == NodeKind::Npu)
            links = unit_links(endpoint_path(t, d.source, d.destinations[0]));
        else
            links = broadcast_tree(t, d.source, d.destinations, mode);
        for (const auto& wl : links)
            out.load[wl.link] += wl.weight * d.rate;
    }
    for (std::size_t l = 0; l < out.load.size(); ++l)
        if (out.load[l] > out.max_load) {
            out.max_load = out.load[l];
            out.hotspot_link = static_cast<int>(l);
        }
    out.hotspot_factor = out.max_load / channel_rate;
    return out;
}

/// Every I/O controller broadcasting to every NPU at `rate`.
inline std::vector<Demand> io_broadcast_demands(const Topology& t, double rate)
{
    std::vector<int> npus(t.npu_count);
    std::iota(npus.begin(), npus.end(), 0);
    std::vector<Demand> out;
    for (int io : t.io_nodes)
        out.push_back({io, npus, rate});
    return out;
}

/// Fraction of line rate the I/O channels sustain when all of them stream
/// to every NPU at once.
inline double io_rate_scale(const Topology& t, double channel_rate, CollectiveMode mode)
{
    if (t.io_nodes.empty())
        return 1.0;
    ChannelLoad cl = max_channel_load(io_broadcast_demands(t, channel_rate), t, mode, channel_rate);
    double scale = 1.0;
    for (std::size_t l = 0; l < cl.load.size(); ++l)
        if (cl.load[l] > 0.0)
            scale = std::min(scale, t.links[l].bandwidth / cl.load[l]);
    return scale;
}

} // namespace fred

#endif // FRED_SIM_HPP
