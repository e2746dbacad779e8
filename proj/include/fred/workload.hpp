#ifndef FRED_WORKLOAD_HPP
#define FRED_WORKLOAD_HPP

// 3D-parallel training workloads: worker grids, communication groups and the
// per-iteration task graph for weight-stationary and weight-streaming runs.

#include "fred/collectives.hpp"
#include "fred/error.hpp"

#include <cstdint>
#include <map>
#include <queue>
#include <string>
#include <vector>

namespace fred {

struct ParallelStrategy {
    int mp = 1;
    int dp = 1;
    int pp = 1;

    int workers() const noexcept { return mp * dp * pp; }
    std::string name() const
    {
        return "MP(" + std::to_string(mp) + ")-DP(" + std::to_string(dp) + ")-PP(" + std::to_string(pp) + ")";
    }
    bool operator==(const ParallelStrategy&) const = default;
};

struct WorkerId {
    int mp = 0;
    int dp = 0;
    int pp = 0;

    /// Three-digit name: MP offset, DP offset, PP offset.
    std::string label() const
    {
        if (mp < 10 && dp < 10 && pp < 10)
            return std::to_string(mp) + std::to_string(dp) + std::to_string(pp);
        return std::to_string(mp) + "." + std::to_string(dp) + "." + std::to_string(pp);
    }
    bool operator==(const WorkerId&) const = default;
    auto operator<=>(const WorkerId&) const = default;
};

/// Linear worker index: MP fastest, then PP, then DP.
inline int worker_index(const ParallelStrategy& s, const WorkerId& w) { return w.mp + s.mp * w.pp + s.mp * s.pp * w.dp; }

inline WorkerId worker_at(const ParallelStrategy& s, int index)
{
    WorkerId w;
    w.mp = index % s.mp;
    w.pp = (index / s.mp) % s.pp;
    w.dp = index / (s.mp * s.pp);
    return w;
}

struct StrategyCheck {
    bool ok = true;
    int idle = 0;
    std::string message;
};

inline StrategyCheck validate_strategy(const ParallelStrategy& s, int npu_count)
{
    StrategyCheck c;
    if (s.mp < 1 || s.dp < 1 || s.pp < 1) {
        c.ok = false;
        c.message = "all parallelism degrees must be at least 1";
        return c;
    }
    if (s.workers() > npu_count) {
        c.ok = false;
        c.message = s.name() + " needs " + std::to_string(s.workers()) + " NPUs, only " + std::to_string(npu_count) +
                    " available";
        return c;
    }
    c.idle = npu_count - s.workers();
    if (c.idle > 0)
        c.message = "non-aligned strategy: " + std::to_string(c.idle) + " idle NPU(s)";
    return c;
}

struct Groups {
    std::vector<std::vector<WorkerId>> mp; // indexed by dp + dp_count * pp
    std::vector<std::vector<WorkerId>> dp; // indexed by mp + mp_count * pp
    std::vector<std::vector<WorkerId>> pp; // indexed by mp + mp_count * dp
};

inline int mp_group_of(const ParallelStrategy& s, int dp, int pp) { return dp + s.dp * pp; }
inline int dp_group_of(const ParallelStrategy& s, int mp, int pp) { return mp + s.mp * pp; }
inline int pp_group_of(const ParallelStrategy& s, int mp, int dp) { return mp + s.mp * dp; }

inline Groups enumerate_groups(const ParallelStrategy& s)
{
    require(s.mp >= 1 && s.dp >= 1 && s.pp >= 1, ErrorKind::Config, "invalid strategy " + s.name());
    Groups g;
    g.mp.resize(s.dp * s.pp);
    g.dp.resize(s.mp * s.pp);
    g.pp.resize(s.mp * s.dp);
    for (int p = 0; p < s.pp; ++p)
        for (int d = 0; d < s.dp; ++d)
            for (int m = 0; m < s.mp; ++m) {
                WorkerId w{m, d, p};
                g.mp[mp_group_of(s, d, p)].push_back(w);
                g.dp[dp_group_of(s, m, p)].push_back(w);
                g.pp[pp_group_of(s, m, d)].push_back(w);
            }
    for (auto* dim : {&g.mp, &g.dp, &g.pp})
        for (auto& grp : *dim)
            std::sort(grp.begin(), grp.end(), [&](const WorkerId& a, const WorkerId& b) {
                return worker_index(s, a) < worker_index(s, b);
            });
    return g;
}

// ---------------------------------------------------------------------------
// Workload description

enum class ExecutionMode { WeightStationary, WeightStreaming };

inline const char* to_string(ExecutionMode m) noexcept
{
    return m == ExecutionMode::WeightStationary ? "WeightStationary" : "WeightStreaming";
}

struct LayerSpec {
    std::string name;
    double fwd_seconds = 0.0; // per microbatch on each worker of the owning stage
    double bwd_seconds = 0.0;
    CollectiveKind mp_pattern = CollectiveKind::AllReduce;
    std::uint64_t mp_bytes = 0;         // MP collective payload per microbatch per pass
    std::uint64_t activation_bytes = 0; // stage-boundary transfer per microbatch
    std::uint64_t param_bytes = 0;
};

struct WorkloadSpec {
    std::string name;
    std::vector<LayerSpec> layers;
    std::uint64_t parameter_bytes = 0;
    std::uint64_t gradient_bytes = 0;
    ExecutionMode mode = ExecutionMode::WeightStationary;
    int microbatches = 1;
    int datatype_bytes = 2;
    int samples_per_replica = 16;
    std::uint64_t sample_bytes = 0;
    int stream_window = 0; // layers per streamed window, 0 = pp
    ParallelStrategy strategy;

    std::uint64_t minibatch_samples() const
    {
        return static_cast<std::uint64_t>(strategy.dp) * static_cast<std::uint64_t>(samples_per_replica);
    }
};

inline void validate_workload(const WorkloadSpec& w, bool has_io)
{
    require(w.microbatches >= 1, ErrorKind::Config, "workload " + w.name + ": microbatches must be at least 1");
    require(w.datatype_bytes >= 1, ErrorKind::Config, "workload " + w.name + ": datatype_bytes must be positive");
    require(!(w.mode == ExecutionMode::WeightStreaming && !has_io), ErrorKind::Config,
            "workload " + w.name + ": weight streaming needs I/O controllers");
    if (!w.layers.empty())
        require(w.parameter_bytes > 0, ErrorKind::Config, "workload " + w.name + ": parameter_bytes must be positive");
    std::uint64_t sum = 0;
    for (const auto& l : w.layers) {
        require(l.fwd_seconds >= 0.0 && l.bwd_seconds >= 0.0, ErrorKind::Config,
                "workload " + w.name + " layer " + l.name + ": negative compute time");
        sum += l.param_bytes;
    }
    require(w.layers.empty() || sum == w.parameter_bytes, ErrorKind::Config,
            "workload " + w.name + ": layer parameter bytes do not add up to parameter_bytes");
}

// ---------------------------------------------------------------------------
// Iteration graph

enum class TaskKind { Compute, Collective, PPTransfer, WeightStreamLoad, GradientStreamReduce, InputLoad };

inline const char* to_string(TaskKind k) noexcept
{
    switch (k) {
    case TaskKind::Compute: return "Compute";
    case TaskKind::Collective: return "Collective";
    case TaskKind::PPTransfer: return "PPTransfer";
    case TaskKind::WeightStreamLoad: return "WeightStreamLoad";
    case TaskKind::GradientStreamReduce: return "GradientStreamReduce";
    case TaskKind::InputLoad: return "InputLoad";
    }
    return "?";
}

enum class Category { Compute, InputLoad, MP, DP, PP, Streaming };
inline constexpr int category_count = 6;

inline const char* to_string(Category c) noexcept
{
    switch (c) {
    case Category::Compute: return "compute";
    case Category::InputLoad: return "initial_input_load";
    case Category::MP: return "mp";
    case Category::DP: return "dp";
    case Category::PP: return "pp";
    case Category::Streaming: return "weight_streaming";
    }
    return "?";
}

enum class Dim { None, MP, DP, PP };

/// Collective tasks carry their pattern over `workers` (linear indices);
/// PPTransfer multicasts from `root` to `workers`; stream tasks move data
/// between I/O controllers and `workers`, split evenly over every channel
/// when io_channel is -1.
struct Task {
    int id = -1;
    TaskKind kind = TaskKind::Compute;
    Category category = Category::Compute;
    Dim dim = Dim::None;
    int group = -1;
    std::vector<int> workers;
    int root = -1;
    int io_channel = -1;
    CollectiveKind pattern = CollectiveKind::AllReduce;
    std::uint64_t bytes = 0;
    double duration = 0.0;
    int iteration = 0;
    int layer = -1;
    int microbatch = -1;
    bool backward = false;
    std::string label;
};

struct IterationGraph {
    ParallelStrategy strategy;
    Groups groups;
    std::vector<Task> tasks;
    std::vector<std::pair<int, int>> edges; // (before, after)
    int iterations = 1;
    std::vector<int> barriers; // end-of-iteration task per iteration

    std::vector<std::vector<int>> successors() const
    {
        std::vector<std::vector<int>> s(tasks.size());
        for (auto [a, b] : edges)
            s[a].push_back(b);
        return s;
    }

    /// Kahn order; throws when the graph has a cycle.
    std::vector<int> topological_order() const
    {
        std::vector<int> indeg(tasks.size(), 0);
        for (auto [a, b] : edges)
            ++indeg[b];
        auto succ = successors();
        std::priority_queue<int, std::vector<int>, std::greater<>> ready;
        for (std::size_t i = 0; i < tasks.size(); ++i)
            if (indeg[i] == 0)
                ready.push(static_cast<int>(i));
        std::vector<int> order;
        while (!ready.empty()) {
            int v = ready.top();
            ready.pop();
            order.push_back(v);
            for (int w : succ[v])
                if (--indeg[w] == 0)
                    ready.push(w);
        }
        require(order.size() == tasks.size(), ErrorKind::Config, "iteration graph has a cycle");
        return order;
    }
};

/// Contiguous layer ranges per pipeline stage.
inline std::vector<std::pair<int, int>> stage_layers(int layers, int pp)
{
    std::vector<std::pair<int, int>> out;
    for (int s = 0; s < pp; ++s)
        out.push_back({s * layers / pp, (s + 1) * layers / pp});
    return out;
}

namespace detail {

class GraphBuilder {
public:
    GraphBuilder(const WorkloadSpec& w, const ParallelStrategy& s) : w_(w), s_(s)
    {
        g_.strategy = s;
        g_.groups = enumerate_groups(s);
    }

    int add(Task t)
    {
        t.id = static_cast<int>(g_.tasks.size());
        t.iteration = iteration_;
        g_.tasks.push_back(std::move(t));
        return g_.tasks.back().id;
    }

    void edge(int a, int b)
    {
        if (a >= 0 && b >= 0)
            g_.edges.push_back({a, b});
    }

    void edges(const std::vector<int>& from, int b)
    {
        for (int a : from)
            edge(a, b);
    }

    std::vector<int> indices(const std::vector<WorkerId>& ws) const
    {
        std::vector<int> v;
        for (const auto& x : ws)
            v.push_back(worker_index(s_, x));
        return v;
    }

    int compute(int layer, int mb, bool bwd, int stage)
    {
        Task t;
        t.kind = TaskKind::Compute;
        t.category = Category::Compute;
        t.layer = layer;
        t.microbatch = mb;
        t.backward = bwd;
        t.group = stage;
        t.duration = bwd ? w_.layers[layer].bwd_seconds : w_.layers[layer].fwd_seconds;
        t.label = std::string(bwd ? "bwd" : "fwd") + " L" + std::to_string(layer) + " mb" + std::to_string(mb);
        return add(t);
    }

    // MP collectives of `layer` for every MP group of `stage`; returns ids.
    std::vector<int> mp_collectives(int layer, int mb, bool bwd, int stage)
    {
        std::vector<int> ids;
        const auto& l = w_.layers[layer];
        if (s_.mp < 2 || l.mp_bytes == 0)
            return ids;
        for (int d = 0; d < s_.dp; ++d) {
            Task t;
            t.kind = TaskKind::Collective;
            t.category = Category::MP;
            t.dim = Dim::MP;
            t.group = mp_group_of(s_, d, stage);
            t.workers = indices(g_.groups.mp[t.group]);
            t.pattern = l.mp_pattern;
            t.bytes = l.mp_bytes;
            t.layer = layer;
            t.microbatch = mb;
            t.backward = bwd;
            t.label = "mp " + std::string(bwd ? "bwd" : "fwd") + " L" + std::to_string(layer) + " mb" +
                      std::to_string(mb) + " g" + std::to_string(t.group);
            ids.push_back(add(t));
        }
        return ids;
    }

    // Stage-boundary transfers: one worker of each sending MP group
    // multicasts to the receiving stage's MP group of the same replica.
    std::vector<int> pp_transfers(int layer, int mb, bool bwd, int from_stage, int to_stage)
    {
        std::vector<int> ids;
        const auto bytes = w_.layers[layer].activation_bytes;
        if (from_stage == to_stage || bytes == 0)
            return ids;
        for (int d = 0; d < s_.dp; ++d) {
            Task t;
            t.kind = TaskKind::PPTransfer;
            t.category = Category::PP;
            t.dim = Dim::PP;
            t.group = d;
            t.root = worker_index(s_, WorkerId{0, d, from_stage});
            t.workers = indices(g_.groups.mp[mp_group_of(s_, d, to_stage)]);
            t.pattern = CollectiveKind::Multicast;
            t.bytes = bytes;
            t.layer = layer;
            t.microbatch = mb;
            t.backward = bwd;
            t.label = "pp " + std::string(bwd ? "bwd" : "fwd") + " L" + std::to_string(layer) + " mb" +
                      std::to_string(mb) + " r" + std::to_string(d);
            ids.push_back(add(t));
        }
        return ids;
    }

    // Per-worker share of a layer's parameters held by MP offset m.
    std::uint64_t mp_share(std::uint64_t bytes, int m) const
    {
        return bytes / s_.mp + (m + 1 == s_.mp ? bytes % s_.mp : 0);
    }

    std::vector<int> dp_all_reduces(int layer, int stage)
    {
        std::vector<int> ids;
        if (s_.dp < 2)
            return ids;
        for (int m = 0; m < s_.mp; ++m) {
            Task t;
            t.kind = TaskKind::Collective;
            t.category = Category::DP;
            t.dim = Dim::DP;
            t.group = dp_group_of(s_, m, stage);
            t.workers = indices(g_.groups.dp[t.group]);
            t.pattern = CollectiveKind::AllReduce;
            t.bytes = mp_share(w_.layers[layer].param_bytes, m);
            t.layer = layer;
            t.backward = true;
            t.label = "dp L" + std::to_string(layer) + " g" + std::to_string(t.group);
            if (t.bytes > 0)
                ids.push_back(add(t));
        }
        return ids;
    }

    std::vector<int> stream_tasks(int layer, int stage, TaskKind kind)
    {
        std::vector<int> ids;
        for (int m = 0; m < s_.mp; ++m) {
            Task t;
            t.kind = kind;
            t.category = Category::Streaming;
            t.dim = kind == TaskKind::GradientStreamReduce ? Dim::DP : Dim::None;
            t.group = dp_group_of(s_, m, stage);
            t.workers = indices(g_.groups.dp[t.group]);
            t.pattern = kind == TaskKind::WeightStreamLoad ? CollectiveKind::Multicast : CollectiveKind::Reduce;
            t.bytes = mp_share(w_.layers[layer].param_bytes, m);
            t.layer = layer;
            t.backward = kind == TaskKind::GradientStreamReduce;
            t.label = std::string(kind == TaskKind::WeightStreamLoad ? "load" : "grad") + " L" +
                      std::to_string(layer) + " m" + std::to_string(m);
            if (t.bytes > 0)
                ids.push_back(add(t));
        }
        return ids;
    }

    std::vector<int> input_loads()
    {
        std::vector<int> ids;
        if (w_.sample_bytes == 0)
            return ids;
        for (int d = 0; d < s_.dp; ++d) {
            Task t;
            t.kind = TaskKind::InputLoad;
            t.category = Category::InputLoad;
            t.group = d;
            t.io_channel = d;
            t.workers = indices(g_.groups.mp[mp_group_of(s_, d, 0)]);
            t.pattern = CollectiveKind::Multicast;
            t.bytes = static_cast<std::uint64_t>(w_.samples_per_replica) * w_.sample_bytes;
            t.label = "input r" + std::to_string(d);
            ids.push_back(add(t));
        }
        return ids;
    }

    void set_iteration(int i) { iteration_ = i; }
    IterationGraph& graph() { return g_; }
    const WorkloadSpec& workload() const { return w_; }
    const ParallelStrategy& strategy() const { return s_; }

private:
    const WorkloadSpec& w_;
    ParallelStrategy s_;
    IterationGraph g_;
    int iteration_ = 0;
};

// One weight-stationary iteration (GPipe schedule). `entry` gates every
// task without an in-iteration predecessor. Returns the sink tasks.
inline std::vector<int> stationary_iteration(GraphBuilder& b, const std::vector<int>& entry)
{
    const auto& w = b.workload();
    const auto& s = b.strategy();
    const int L = static_cast<int>(w.layers.size());
    const int M = w.microbatches;
    const auto stages = stage_layers(L, s.pp);
    std::vector<int> sinks;
    // done[layer][mb]: tasks that must finish before the next consumer starts
    std::vector<std::vector<std::vector<int>>> fwd_done(L, std::vector<std::vector<int>>(M));
    std::vector<std::vector<int>> fwd_compute(L, std::vector<int>(M, -1));
    for (int st = 0; st < s.pp; ++st) {
        auto [lo, hi] = stages[st];
        for (int mb = 0; mb < M; ++mb)
            for (int l = lo; l < hi; ++l) {
                int c = b.compute(l, mb, false, st);
                fwd_compute[l][mb] = c;
                if (l == lo) {
                    if (st == 0) {
                        b.edges(entry, c);
                    } else {
                        // boundary transfer from the previous stage's last layer
                        int prev = stages[st - 1].second - 1;
                        auto deps = fwd_done[prev][mb];
                        auto pp = b.pp_transfers(prev, mb, false, st - 1, st);
                        for (int t : pp)
                            b.edges(deps, t);
                        b.edges(pp.empty() ? deps : pp, c);
                    }
                } else {
                    b.edges(fwd_done[l - 1][mb], c);
                }
                if (mb > 0)
                    b.edge(fwd_compute[l][mb - 1], c);
                auto mp = b.mp_collectives(l, mb, false, st);
                for (int t : mp)
                    b.edge(c, t);
                fwd_done[l][mb] = mp.empty() ? std::vector<int>{c} : mp;
            }
    }
    // backward: last stage first, reversed layers; a stage starts after its
    // forward pass of every microbatch (pipeline flush)
    std::vector<std::vector<std::vector<int>>> bwd_done(L, std::vector<std::vector<int>>(M));
    std::vector<std::vector<int>> bwd_compute(L, std::vector<int>(M, -1));
    for (int st = s.pp - 1; st >= 0; --st) {
        auto [lo, hi] = stages[st];
        for (int mb = 0; mb < M; ++mb)
            for (int l = hi - 1; l >= lo; --l) {
                int c = b.compute(l, mb, true, st);
                bwd_compute[l][mb] = c;
                if (l == hi - 1) {
                    if (hi > lo) {
                        b.edges(fwd_done[hi - 1][M - 1], c);
                        b.edges(fwd_done[hi - 1][mb], c);
                    }
                    if (st + 1 < s.pp) {
                        int next = stages[st + 1].first;
                        auto deps = bwd_done[next][mb];
                        auto pp = b.pp_transfers(next, mb, true, st + 1, st);
                        for (int t : pp)
                            b.edges(deps, t);
                        b.edges(pp.empty() ? deps : pp, c);
                    }
                } else {
                    b.edges(bwd_done[l + 1][mb], c);
                }
                if (mb > 0)
                    b.edge(bwd_compute[l][mb - 1], c);
                auto mp = b.mp_collectives(l, mb, true, st);
                for (int t : mp)
                    b.edge(c, t);
                bwd_done[l][mb] = mp.empty() ? std::vector<int>{c} : mp;
            }
        for (int l = hi - 1; l >= lo; --l) {
            auto dp = b.dp_all_reduces(l, st);
            for (int mb = 0; mb < M; ++mb) {
                for (int t : dp)
                    b.edges(bwd_done[l][mb], t);
                sinks.insert(sinks.end(), bwd_done[l][mb].begin(), bwd_done[l][mb].end());
            }
            sinks.insert(sinks.end(), dp.begin(), dp.end());
        }
    }
    return sinks;
}

// One weight-streaming iteration: windows of consecutive layers are loaded
// from the I/O controllers, layer i of a window runs on stage i mod pp, and
// gradients are reduced toward the I/O controllers during back-propagation.
inline std::vector<int> streaming_iteration(GraphBuilder& b, const std::vector<int>& entry)
{
    const auto& w = b.workload();
    const auto& s = b.strategy();
    const int L = static_cast<int>(w.layers.size());
    const int M = w.microbatches;
    const int win = w.stream_window > 0 ? w.stream_window : s.pp;
    auto stage_of = [&](int l) { return (l % win) % s.pp; };
    std::vector<int> sinks;

    std::vector<int> prev_load = entry;
    std::vector<std::vector<int>> loads(L);
    for (int start = 0; start < L; start += win) {
        std::vector<int> this_window;
        for (int l = start; l < std::min(L, start + win); ++l) {
            loads[l] = b.stream_tasks(l, stage_of(l), TaskKind::WeightStreamLoad);
            for (int t : loads[l])
                b.edges(prev_load, t);
            this_window.insert(this_window.end(), loads[l].begin(), loads[l].end());
        }
        if (!this_window.empty())
            prev_load = this_window;
    }
    std::vector<std::vector<std::vector<int>>> done(L, std::vector<std::vector<int>>(M));
    std::vector<std::vector<int>> comp(L, std::vector<int>(M, -1));
    for (int l = 0; l < L; ++l)
        for (int mb = 0; mb < M; ++mb) {
            int c = b.compute(l, mb, false, stage_of(l));
            comp[l][mb] = c;
            b.edges(loads[l], c);
            b.edges(entry, c);
            if (l > 0) {
                auto deps = done[l - 1][mb];
                auto pp = b.pp_transfers(l - 1, mb, false, stage_of(l - 1), stage_of(l));
                for (int t : pp)
                    b.edges(deps, t);
                b.edges(pp.empty() ? deps : pp, c);
            }
            if (mb > 0)
                b.edge(comp[l][mb - 1], c);
            auto mp = b.mp_collectives(l, mb, false, stage_of(l));
            for (int t : mp)
                b.edge(c, t);
            done[l][mb] = mp.empty() ? std::vector<int>{c} : mp;
        }

    // backward reloads the windows in reverse order
    std::vector<int> fwd_end = L > 0 ? done[L - 1][M - 1] : entry;
    prev_load = prev_load.empty() ? entry : prev_load;
    std::vector<std::vector<int>> bloads(L);
    const int last_start = L == 0 ? 0 : ((L - 1) / win) * win;
    for (int start = last_start; start >= 0 && L > 0; start -= win) {
        std::vector<int> this_window;
        for (int l = start; l < std::min(L, start + win); ++l) {
            bloads[l] = b.stream_tasks(l, stage_of(l), TaskKind::WeightStreamLoad);
            for (int t : bloads[l]) {
                b.edges(prev_load, t);
                b.graph().tasks[t].backward = true;
            }
            this_window.insert(this_window.end(), bloads[l].begin(), bloads[l].end());
        }
        if (!this_window.empty())
            prev_load = this_window;
    }
    std::vector<std::vector<std::vector<int>>> bdone(L, std::vector<std::vector<int>>(M));
    std::vector<std::vector<int>> bcomp(L, std::vector<int>(M, -1));
    for (int l = L - 1; l >= 0; --l) {
        for (int mb = 0; mb < M; ++mb) {
            int c = b.compute(l, mb, true, stage_of(l));
            bcomp[l][mb] = c;
            b.edges(bloads[l], c);
            if (l == L - 1) {
                b.edges(fwd_end, c);
                b.edges(done[l][mb], c);
            } else {
                auto deps = bdone[l + 1][mb];
                auto pp = b.pp_transfers(l + 1, mb, true, stage_of(l + 1), stage_of(l));
                for (int t : pp)
                    b.edges(deps, t);
                b.edges(pp.empty() ? deps : pp, c);
            }
            if (mb > 0)
                b.edge(bcomp[l][mb - 1], c);
            auto mp = b.mp_collectives(l, mb, true, stage_of(l));
            for (int t : mp)
                b.edge(c, t);
            bdone[l][mb] = mp.empty() ? std::vector<int>{c} : mp;
        }
        auto grads = b.stream_tasks(l, stage_of(l), TaskKind::GradientStreamReduce);
        for (int mb = 0; mb < M; ++mb) {
            for (int t : grads)
                b.edges(bdone[l][mb], t);
            sinks.insert(sinks.end(), bdone[l][mb].begin(), bdone[l][mb].end());
        }
        sinks.insert(sinks.end(), grads.begin(), grads.end());
    }
    return sinks;
}

} // namespace detail

/// Task graph for `iterations` back-to-back iterations. Each iteration ends
/// in a zero-length barrier. Input minibatches are prefetched during the
/// previous iteration unless streaming keeps the I/O controllers busy.
inline IterationGraph build_iteration_graph(const WorkloadSpec& w, const ParallelStrategy& s, int iterations = 1)
{
    require(iterations >= 1, ErrorKind::Config, "iterations must be at least 1");
    auto check = validate_strategy(s, s.workers());
    require(check.ok, ErrorKind::Config, check.message);
    const int layers = static_cast<int>(w.layers.size());
    require(w.mode != ExecutionMode::WeightStationary || layers == 0 || layers >= s.pp, ErrorKind::Config,
            "workload " + w.name + ": " + std::to_string(layers) + " layers cannot fill " + std::to_string(s.pp) +
                " pipeline stages");
    detail::GraphBuilder b(w, s);
    b.graph().iterations = iterations;
    int barrier = -1;
    std::vector<int> prev_inputs;
    const bool prefetch = w.mode != ExecutionMode::WeightStreaming;
    for (int it = 0; it < iterations; ++it) {
        b.set_iteration(it);
        auto inputs = b.input_loads();
        for (int t : inputs) {
            if (prefetch)
                b.edges(prev_inputs, t);
            else
                b.edge(barrier, t);
        }
        std::vector<int> entry = inputs;
        if (barrier >= 0)
            entry.push_back(barrier);
        std::vector<int> sinks = w.mode == ExecutionMode::WeightStationary ? detail::stationary_iteration(b, entry)
                                                                           : detail::streaming_iteration(b, entry);
        Task end;
        end.kind = TaskKind::Compute;
        end.label = "iteration " + std::to_string(it) + " end";
        int e = b.add(end);
        b.edges(sinks, e);
        b.edges(entry, e);
        barrier = e;
        b.graph().barriers.push_back(e);
        prev_inputs = inputs;
    }
    IterationGraph g = std::move(b.graph());
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
    return g;
}

} // namespace fred

#endif // FRED_WORKLOAD_HPP
