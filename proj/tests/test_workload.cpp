#include "fred/fred.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace fred;

namespace {

WorkloadSpec toy(int layers, ExecutionMode mode, int microbatches, ParallelStrategy s)
{
    WorkloadSpec w;
    w.name = "toy";
    w.mode = mode;
    w.microbatches = microbatches;
    w.strategy = s;
    w.sample_bytes = 1000;
    for (int l = 0; l < layers; ++l) {
        LayerSpec ls;
        ls.name = "l" + std::to_string(l);
        ls.fwd_seconds = 1e-6 * (l + 1);
        ls.bwd_seconds = 2e-6 * (l + 1);
        ls.mp_bytes = 4096;
        ls.activation_bytes = 2048;
        ls.param_bytes = 1000003 + 17 * l;
        w.parameter_bytes += ls.param_bytes;
        w.layers.push_back(ls);
    }
    w.gradient_bytes = w.parameter_bytes;
    return w;
}

std::vector<ParallelStrategy> all_strategies(int max_workers)
{
    std::vector<ParallelStrategy> out;
    for (int mp = 1; mp <= max_workers; ++mp)
        for (int dp = 1; mp * dp <= max_workers; ++dp)
            for (int pp = 1; mp * dp * pp <= max_workers; ++pp)
                out.push_back({mp, dp, pp});
    return out;
}

std::uint64_t sum_bytes(const IterationGraph& g, TaskKind kind, Category cat, int iteration)
{
    std::uint64_t s = 0;
    for (const auto& t : g.tasks)
        if (t.kind == kind && t.category == cat && t.iteration == iteration)
            s += t.bytes;
    return s;
}

// Labels of tasks of `iteration` that do not precede its barrier.
std::string tasks_missing_barrier(const IterationGraph& g, int iteration)
{
    auto succ = g.successors();
    std::vector<char> reaches(g.tasks.size(), 0);
    auto order = g.topological_order();
    const int barrier = g.barriers.at(iteration);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const int v = *it;
        reaches[v] = v == barrier;
        for (int w : succ[v])
            reaches[v] = reaches[v] || reaches[w];
    }
    std::string out;
    for (const auto& t : g.tasks)
        if (t.iteration == iteration && t.kind != TaskKind::InputLoad && !reaches[t.id])
            out += t.label + "; ";
    return out;
}

} // namespace

TEST(Strategy, WorkerIndexRoundTrips)
{
    for (const auto& s : all_strategies(20))
        for (int i = 0; i < s.workers(); ++i)
            ASSERT_EQ(worker_index(s, worker_at(s, i)), i) << s.name();
}

TEST(Strategy, GroupsPartitionWorkers)
{
    for (const auto& s : all_strategies(20)) {
        auto g = enumerate_groups(s);
        auto check = [&](const std::vector<std::vector<WorkerId>>& dim, std::size_t count, std::size_t size) {
            ASSERT_EQ(dim.size(), count) << s.name();
            std::set<int> seen;
            for (const auto& grp : dim) {
                ASSERT_EQ(grp.size(), size) << s.name();
                for (const auto& w : grp)
                    EXPECT_TRUE(seen.insert(worker_index(s, w)).second);
            }
            EXPECT_EQ(seen.size(), static_cast<std::size_t>(s.workers()));
        };
        check(g.mp, s.dp * s.pp, s.mp);
        check(g.dp, s.mp * s.pp, s.dp);
        check(g.pp, s.mp * s.dp, s.pp);
        for (std::size_t i = 0; i < g.mp.size(); ++i)
            for (const auto& w : g.mp[i])
                EXPECT_EQ(mp_group_of(s, w.dp, w.pp), static_cast<int>(i));
        for (std::size_t i = 0; i < g.dp.size(); ++i)
            for (const auto& w : g.dp[i])
                EXPECT_EQ(dp_group_of(s, w.mp, w.pp), static_cast<int>(i));
    }
}

TEST(Strategy, IdleNpusAndOverflow)
{
    auto c = validate_strategy({3, 3, 2}, 20);
    EXPECT_TRUE(c.ok);
    EXPECT_EQ(c.idle, 2);
    EXPECT_FALSE(validate_strategy({7, 3, 1}, 20).ok);
    EXPECT_FALSE(validate_strategy({0, 3, 1}, 20).ok);
    EXPECT_EQ(validate_strategy({2, 5, 2}, 20).idle, 0);
}

TEST(Workload, MinibatchScalesWithDataParallelism)
{
    for (int dp = 1; dp <= 20; ++dp) {
        auto w = toy(4, ExecutionMode::WeightStationary, 2, {1, dp, 1});
        EXPECT_EQ(w.minibatch_samples(), 16u * dp);
    }
}

TEST(Workload, GraphsAreAcyclicForAllStrategies)
{
    for (auto mode : {ExecutionMode::WeightStationary, ExecutionMode::WeightStreaming})
        for (const auto& s : all_strategies(8)) {
            auto w = toy(6, mode, 3, s);
            if (mode == ExecutionMode::WeightStationary && s.pp > 6) {
                EXPECT_THROW(build_iteration_graph(w, s, 2), Error);
                continue;
            }
            auto g = build_iteration_graph(w, s, 2);
            ASSERT_NO_THROW(g.topological_order()) << s.name();
            ASSERT_EQ(g.barriers.size(), 2u);
            for (auto [a, b] : g.edges) {
                ASSERT_GE(a, 0);
                ASSERT_LT(b, static_cast<int>(g.tasks.size()));
            }
        }
}

TEST(Workload, BarrierFollowsEveryTaskOfItsIteration)
{
    for (auto mode : {ExecutionMode::WeightStationary, ExecutionMode::WeightStreaming})
        for (const auto& s : all_strategies(8)) {
            if (s.pp > 6)
                continue;
            auto g = build_iteration_graph(toy(6, mode, 3, s), s, 2);
            for (std::size_t it = 0; it < 2; ++it) {
                auto late = tasks_missing_barrier(g, static_cast<int>(it));
                EXPECT_TRUE(late.empty()) << s.name() << " " << to_string(mode) << " " << late;
            }
        }
}

TEST(Workload, DataParallelBytesCoverAllParameters)
{
    for (const auto& s : all_strategies(12)) {
        if (s.dp < 2)
            continue;
        auto w = toy(7, ExecutionMode::WeightStationary, 2, s);
        auto g = build_iteration_graph(w, s, 1);
        EXPECT_EQ(sum_bytes(g, TaskKind::Collective, Category::DP, 0), w.parameter_bytes) << s.name();
        int dp_tasks = 0;
        for (const auto& t : g.tasks) {
            if (t.category != Category::DP)
                continue;
            ++dp_tasks;
            EXPECT_EQ(t.workers.size(), static_cast<std::size_t>(s.dp));
        }
        EXPECT_EQ(dp_tasks, 7 * s.mp);
    }
}

TEST(Workload, StreamedGradientsCoverAllParameters)
{
    for (const auto& s : all_strategies(12)) {
        auto w = toy(5, ExecutionMode::WeightStreaming, 2, s);
        auto g = build_iteration_graph(w, s, 1);
        EXPECT_EQ(sum_bytes(g, TaskKind::GradientStreamReduce, Category::Streaming, 0), w.parameter_bytes) << s.name();
        EXPECT_GE(sum_bytes(g, TaskKind::WeightStreamLoad, Category::Streaming, 0), w.parameter_bytes);
        EXPECT_EQ(sum_bytes(g, TaskKind::Collective, Category::DP, 0), 0u);
    }
}

TEST(Workload, ModelParallelCollectivesPerLayerAndPass)
{
    ParallelStrategy s{3, 2, 1};
    auto g = build_iteration_graph(toy(4, ExecutionMode::WeightStationary, 2, s), s, 1);
    int mp = 0;
    for (const auto& t : g.tasks) {
        if (t.category != Category::MP)
            continue;
        ++mp;
        EXPECT_EQ(t.workers.size(), 3u);
    }
    EXPECT_EQ(mp, 4 * 2 * 2 * s.dp);
    ParallelStrategy none{1, 6, 1};
    auto g1 = build_iteration_graph(toy(4, ExecutionMode::WeightStationary, 2, none), none, 1);
    for (const auto& t : g1.tasks)
        EXPECT_NE(t.category, Category::MP);
}

TEST(Workload, PipelineTransfersAtStageBoundaries)
{
    ParallelStrategy s{1, 2, 3};
    auto g = build_iteration_graph(toy(6, ExecutionMode::WeightStationary, 4, s), s, 1);
    int fwd = 0, bwd = 0;
    for (const auto& t : g.tasks)
        if (t.kind == TaskKind::PPTransfer)
            (t.backward ? bwd : fwd)++;
    EXPECT_EQ(fwd, (s.pp - 1) * 4 * s.dp);
    EXPECT_EQ(bwd, (s.pp - 1) * 4 * s.dp);
}

TEST(Workload, InputLoadsPerReplica)
{
    ParallelStrategy s{2, 5, 2};
    auto w = toy(4, ExecutionMode::WeightStationary, 2, s);
    auto g = build_iteration_graph(w, s, 2);
    int loads = 0;
    for (const auto& t : g.tasks) {
        if (t.kind != TaskKind::InputLoad)
            continue;
        ++loads;
        EXPECT_EQ(t.bytes, 16u * w.sample_bytes);
        EXPECT_EQ(t.workers.size(), 2u);
    }
    EXPECT_EQ(loads, 2 * s.dp);
}

TEST(Workload, RejectsBadInputs)
{
    auto w = toy(3, ExecutionMode::WeightStreaming, 1, {1, 1, 1});
    EXPECT_THROW(validate_workload(w, false), Error);
    EXPECT_NO_THROW(validate_workload(w, true));
    w.parameter_bytes += 1;
    EXPECT_THROW(validate_workload(w, true), Error);
    EXPECT_THROW(build_iteration_graph(w, {1, 1, 1}, 0), Error);
}

TEST(Workload, EmptyWorkloadBuilds)
{
    WorkloadSpec w;
    w.name = "empty";
    auto g = build_iteration_graph(w, {1, 1, 1}, 2);
    EXPECT_EQ(g.barriers.size(), 2u);
    EXPECT_NO_THROW(g.topological_order());
}
