#include "fred/fred.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace fred;

namespace {

SimTask comm(std::vector<std::vector<FlowSpec>> steps, Category c = Category::MP)
{
    SimTask t;
    t.comm = true;
    t.steps = std::move(steps);
    t.category = c;
    return t;
}

SimTask compute(double seconds)
{
    SimTask t;
    t.duration = seconds;
    return t;
}

FlowSpec flow(std::vector<int> links, double bytes, int hops = 1)
{
    FlowSpec f;
    f.links = unit_links(links);
    f.bytes = bytes;
    f.hops = hops;
    return f;
}

// Random unicast flows between NPUs of `t` along minimal paths.
std::vector<FlowSpec> random_flows(const Topology& t, int n, std::mt19937& rng)
{
    std::uniform_int_distribution<int> npu(0, t.npu_count - 1);
    std::uniform_real_distribution<double> size(1e6, 5e7);
    std::vector<FlowSpec> out;
    while (static_cast<int>(out.size()) < n) {
        int a = npu(rng), b = npu(rng);
        if (a == b)
            continue;
        auto path = endpoint_path(t, a, b);
        FlowSpec f = flow(path, size(rng), static_cast<int>(path.size()));
        f.injectors = {a};
        out.push_back(f);
    }
    return out;
}

double total_bytes_on(const std::vector<FlowSpec>& flows, int link)
{
    double s = 0.0;
    for (const auto& f : flows)
        for (const auto& wl : f.links)
            if (wl.link == link)
                s += wl.weight * f.bytes;
    return s;
}

} // namespace

TEST(Engine, SingleUnicastTime)
{
    auto t = build_mesh(1, 2, 750 * GBps, {});
    const int l = t.link_between(0, 1);
    auto r = FlowEngine(t).run({comm({{flow({l}, 750e9)}})}, {});
    EXPECT_NEAR(r.makespan, 1.00000002, 1e-12);
    EXPECT_DOUBLE_EQ(r.link_bytes[l], 750e9);
    EXPECT_NEAR(r.link_peak[l], 1.0, 1e-12);
}

TEST(Engine, TwoFlowsShareALink)
{
    auto t = build_mesh(1, 2, 750 * GBps, {});
    const int l = t.link_between(0, 1);
    auto r = FlowEngine(t).run({comm({{flow({l}, 750e9), flow({l}, 750e9)}})}, {});
    EXPECT_NEAR(r.makespan, 2.00000002, 1e-12);
    // unequal sizes: the short flow leaves and the long one takes the whole link
    auto u = FlowEngine(t).run({comm({{flow({l}, 375e9), flow({l}, 750e9)}})}, {});
    EXPECT_NEAR(u.makespan, 1.5 + 20e-9, 1e-12);
}

TEST(Engine, StepsAreBarriers)
{
    auto t = build_mesh(1, 3, 750 * GBps, {});
    const int a = t.link_between(0, 1), b = t.link_between(1, 2);
    auto r = FlowEngine(t).run({comm({{flow({a}, 750e9)}, {flow({b}, 750e9)}})}, {});
    EXPECT_NEAR(r.makespan, 2.00000004, 1e-12);
}

TEST(Engine, DependenciesAndComputeOverlap)
{
    auto t = build_mesh(1, 2, 750 * GBps, {});
    const int l = t.link_between(0, 1);
    std::vector<SimTask> tasks{compute(1.0), comm({{flow({l}, 1500e9, 0)}}), compute(0.5)};
    auto r = FlowEngine(t).run(tasks, {{0, 2}});
    EXPECT_NEAR(r.makespan, 2.0, 1e-12);
    EXPECT_NEAR(r.task_finish[2], 1.5, 1e-12);
    EXPECT_NEAR(r.busy[0], 1.5, 1e-12);
    EXPECT_NEAR(r.busy[static_cast<int>(Category::MP)], 0.5, 1e-12);
}

TEST(Engine, RatesAreMaxMinFair)
{
    auto t = platform_preset("Baseline").build();
    std::mt19937 rng(21);
    int snapshots = 0;
    EngineOptions opts;
    opts.on_rates = [&](const RateSnapshot& s) {
        ++snapshots;
        const auto& cap = *s.capacity;
        std::vector<double> used(cap.size(), 0.0);
        for (std::size_t f = 0; f < s.rates.size(); ++f)
            for (const auto& wl : *s.flow_links[f])
                used[wl.link] += wl.weight * s.rates[f];
        for (std::size_t l = 0; l < cap.size(); ++l)
            ASSERT_LE(used[l], cap[l] * (1 + 1e-9));
        // every flow has a saturated link on which no other flow is faster
        for (std::size_t f = 0; f < s.rates.size(); ++f) {
            bool bottleneck = false;
            for (const auto& wl : *s.flow_links[f]) {
                if (used[wl.link] < cap[wl.link] * (1 - 1e-9))
                    continue;
                bool fastest = true;
                for (std::size_t g = 0; g < s.rates.size(); ++g)
                    for (const auto& o : *s.flow_links[g])
                        if (o.link == wl.link && s.rates[g] > s.rates[f] * (1 + 1e-9))
                            fastest = false;
                bottleneck = bottleneck || fastest;
            }
            ASSERT_TRUE(bottleneck) << "flow " << f;
        }
    };
    for (int k = 0; k < 20; ++k)
        FlowEngine(t).run({comm({random_flows(t, 30, rng)})}, {}, opts);
    EXPECT_GT(snapshots, 100);
}

TEST(Engine, LinkBytesAreConserved)
{
    auto t = platform_preset("Baseline").build();
    std::mt19937 rng(22);
    for (int k = 0; k < 10; ++k) {
        auto flows = random_flows(t, 25, rng);
        auto r = FlowEngine(t).run({comm({flows})}, {});
        for (std::size_t l = 0; l < t.links.size(); ++l)
            EXPECT_NEAR(r.link_bytes[l], total_bytes_on(flows, static_cast<int>(l)), 1e-3);
        double inj = 0.0, want = 0.0;
        for (auto [n, b] : r.injected)
            inj += b;
        for (const auto& f : flows)
            want += f.bytes;
        EXPECT_NEAR(inj, want, 1e-3);
    }
}

TEST(Engine, WorkConservingOnABottleneck)
{
    auto t = build_mesh(1, 2, 750 * GBps, {});
    const int l = t.link_between(0, 1);
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> size(1e8, 1e10);
    for (int k = 0; k < 20; ++k) {
        std::vector<FlowSpec> flows;
        double total = 0.0;
        for (int i = 0; i < 1 + k % 7; ++i) {
            flows.push_back(flow({l}, size(rng), 0));
            total += flows.back().bytes;
        }
        auto r = FlowEngine(t).run({comm({flows})}, {});
        EXPECT_NEAR(r.makespan, total / (750 * GBps), 1e-9 * r.makespan);
    }
}

TEST(Engine, Deterministic)
{
    auto t = platform_preset("FRED-C").build();
    std::mt19937 rng(24);
    auto flows = random_flows(t, 40, rng);
    EngineOptions o;
    o.trace = true;
    auto a = FlowEngine(t).run({comm({flows}), compute(1e-4)}, {}, o);
    auto b = FlowEngine(t).run({comm({flows}), compute(1e-4)}, {}, o);
    EXPECT_EQ(a.makespan, b.makespan);
    EXPECT_EQ(a.link_bytes, b.link_bytes);
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        EXPECT_EQ(a.trace[i].time, b.trace[i].time);
        EXPECT_EQ(a.trace[i].flow, b.trace[i].flow);
    }
}

TEST(Engine, StallsAndCyclesAreErrors)
{
    auto t = build_mesh(1, 2, 750 * GBps, {});
    try {
        FlowEngine(t).run({compute(1.0), compute(1.0)}, {{0, 1}, {1, 0}});
        FAIL() << "cycle accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Simulation);
    }
}

TEST(ChannelLoad, MeshHotspotIsTwoNMinusOne)
{
    for (int n : {3, 4, 5, 6}) {
        auto t = build_mesh(n, n, 750 * GBps, border_io_attachments(n, n));
        auto cl = max_channel_load(io_broadcast_demands(t, 128 * GBps), t, CollectiveMode::Endpoint, 128 * GBps);
        EXPECT_NEAR(cl.hotspot_factor, 2.0 * n - 1.0, 1e-9) << n << "x" << n;
    }
}

TEST(ChannelLoad, StaticScaleMatchesDynamicThroughput)
{
    for (const char* name : {"Baseline", "FRED-C", "FRED-D"}) {
        auto spec = platform_preset(name);
        auto t = spec.build();
        const double rate = t.links[t.out_links(t.io_nodes[0])[0]].bandwidth;
        const auto mode = spec.in_network_capable ? CollectiveMode::InNetwork : CollectiveMode::Endpoint;
        const double scale = io_rate_scale(t, rate, mode);
        std::vector<FlowSpec> flows;
        const double bytes = 1e9;
        for (const auto& d : io_broadcast_demands(t, rate)) {
            FlowSpec f;
            f.links = broadcast_tree(t, d.source, d.destinations, mode);
            f.bytes = bytes;
            flows.push_back(f);
        }
        auto r = FlowEngine(t).run({comm({flows}, Category::InputLoad)}, {});
        // every stream finishing together is the fluid optimum of the static load
        EXPECT_NEAR(r.makespan, bytes / (rate * scale), 1e-6 * r.makespan) << name;
    }
    EXPECT_NEAR(io_rate_scale(platform_preset("Baseline").build(), 128 * GBps, CollectiveMode::Endpoint),
                750.0 / (128.0 * 9), 1e-9);
}

TEST(Simulate, AccountingAddsUp)
{
    for (const char* w : {"ResNet-152", "Transformer-17B", "GPT-3"})
        for (const char* p : {"Baseline", "FRED-A", "FRED-D"}) {
            ScenarioConfig cfg;
            cfg.platform = platform_preset(p);
            cfg.workload = workload_preset(w);
            auto rep = run_scenario(cfg);
            double sum = rep.compute + rep.idle;
            for (int c = 1; c < category_count; ++c) {
                EXPECT_GE(rep.exposed[c], 0.0);
                sum += rep.exposed[c];
            }
            EXPECT_NEAR(sum, rep.total, 1e-9 * rep.total) << w << " on " << p;
            EXPECT_GT(rep.compute, 0.0);
        }
}

TEST(Simulate, ComputeOnlyGraphHasNoExposure)
{
    WorkloadSpec w;
    w.name = "compute-only";
    for (int l = 0; l < 4; ++l) {
        LayerSpec ls;
        ls.name = "l" + std::to_string(l);
        ls.fwd_seconds = 1e-3;
        ls.bwd_seconds = 2e-3;
        ls.param_bytes = 10;
        w.parameter_bytes += 10;
        w.layers.push_back(ls);
    }
    ParallelStrategy s{1, 1, 1};
    w.strategy = s;
    auto t = platform_preset("FRED-A").build();
    auto g = build_iteration_graph(w, s, 2);
    auto rep = simulate(g, t, place(s, t), {});
    EXPECT_NEAR(rep.total, 12e-3, 1e-12);
    EXPECT_NEAR(rep.compute, 12e-3, 1e-12);
    for (int c = 1; c < category_count; ++c)
        EXPECT_EQ(rep.exposed[c], 0.0);
}

TEST(Simulate, EffectiveBandwidthOfWaferAllReduce)
{
    // in-network all-reduce streams once per NPU; the ring sends 2(N-1)/N
    auto b = wafer_all_reduce_bandwidth(platform_preset("FRED-D"), 1 << 30);
    auto c = wafer_all_reduce_bandwidth(platform_preset("FRED-C"), 1 << 30);
    EXPECT_GT(b.per_npu, 0.0);
    EXPECT_NEAR(c.mean_injected / b.mean_injected, 2.0 * 19 / 20, 1e-6);
}
