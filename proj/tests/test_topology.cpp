#include "fred/topology.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace fred;

namespace {

FabricSpec two_level(double uplink, int leaves = 5, int per_leaf = 4)
{
    FabricSpec f;
    FabricSwitchSpec root;
    root.name = "L2";
    f.switches.push_back(root);
    int npu = 0;
    for (int i = 0; i < leaves; ++i) {
        FabricSwitchSpec leaf;
        leaf.name = "L1." + std::to_string(i);
        leaf.parent = 0;
        leaf.uplink_lanes = 4;
        leaf.uplink_bandwidth = uplink;
        for (int k = 0; k < per_leaf; ++k)
            leaf.npus.push_back(npu++);
        leaf.io_count = i < 3 ? 4 : 3;
        f.switches.push_back(leaf);
    }
    return f;
}

} // namespace

TEST(Mesh, DirectedNpuLinkCount)
{
    for (int r = 1; r <= 6; ++r)
        for (int c = 1; c <= 6; ++c) {
            auto t = build_mesh(r, c, 750 * GBps, {});
            EXPECT_EQ(t.npu_link_count(), static_cast<std::size_t>(2 * (r * (c - 1) + c * (r - 1)))) << r << "x" << c;
        }
}

TEST(Mesh, BaselineHasEighteenBorderChannels)
{
    auto ios = border_io_attachments(4, 5);
    EXPECT_EQ(ios.size(), 18u);
    auto t = build_mesh(4, 5, 750 * GBps, ios);
    EXPECT_EQ(t.io_nodes.size(), 18u);
    EXPECT_EQ(t.npu_count, 20);
    for (int io : t.io_nodes) {
        const int npu = t.nodes[io].attached_to;
        EXPECT_GE(t.link_between(io, npu), 0);
        EXPECT_DOUBLE_EQ(t.links[t.link_between(io, npu)].bandwidth, 128 * GBps);
    }
}

TEST(Mesh, NxNHasFourNChannels)
{
    for (int n = 2; n <= 8; ++n)
        EXPECT_EQ(border_io_attachments(n, n).size(), static_cast<std::size_t>(4 * n));
}

TEST(Mesh, Bisection)
{
    EXPECT_DOUBLE_EQ(bisection_bandwidth(build_mesh(4, 5, 750 * GBps, {})), 3.75 * TBps);
    EXPECT_DOUBLE_EQ(bisection_bandwidth(build_mesh(4, 4, 750 * GBps, {})), 3.0 * TBps);
}

TEST(Mesh, PathsAreDimensionOrderedAndMinimal)
{
    auto t = build_mesh(4, 5, 750 * GBps, {});
    const auto& m = t.mesh();
    for (int s = 0; s < 20; ++s)
        for (int d = 0; d < 20; ++d) {
            for (bool xf : {true, false}) {
                auto p = mesh_path(t, s, d, xf);
                const int manhattan =
                    std::abs(mesh_row(m, s) - mesh_row(m, d)) + std::abs(mesh_col(m, s) - mesh_col(m, d));
                ASSERT_EQ(static_cast<int>(p.size()), manhattan);
                int at = s;
                bool turned = false;
                for (int l : p) {
                    ASSERT_EQ(t.links[l].src, at);
                    const bool horizontal = mesh_row(m, t.links[l].src) == mesh_row(m, t.links[l].dst);
                    if (horizontal != xf)
                        turned = true;
                    else
                        EXPECT_FALSE(turned) << "second dimension before the first is done";
                    at = t.links[l].dst;
                }
                EXPECT_EQ(at, d);
            }
        }
}

TEST(Fabric, PresetShapes)
{
    auto t = build_fred_fabric(two_level(12 * TBps));
    ASSERT_TRUE(t.is_fabric());
    EXPECT_EQ(t.npu_count, 20);
    EXPECT_EQ(t.io_nodes.size(), 18u);
    const auto& fs = t.fabric();
    ASSERT_EQ(fs.switches.size(), 6u);
    EXPECT_EQ(fs.switches[0].sw.ports, 20); // 5 leaves x 4 lanes
    EXPECT_EQ(fs.switches[1].sw.ports, 12); // 4 NPUs + 4 I/O + 4 lanes
    EXPECT_EQ(fs.switches[4].sw.ports, 11);
    EXPECT_TRUE(npus_connected(t));
}

TEST(Fabric, BisectionIsTheTighterOfNpuAndUplinkCuts)
{
    for (double up : {0.75, 1.5, 3.0, 6.0, 12.0, 24.0}) {
        auto t = build_fred_fabric(two_level(up * TBps));
        // oracle: half the uplink bandwidth, capped by half the NPU links
        const double oracle = std::min(20 * 3 * TBps, 5 * up * TBps) / 2;
        EXPECT_NEAR(bisection_bandwidth(t), oracle, 1e-6 * oracle) << up;
    }
    EXPECT_DOUBLE_EQ(bisection_bandwidth(build_fred_fabric(two_level(12 * TBps))), 30 * TBps);
    EXPECT_DOUBLE_EQ(bisection_bandwidth(build_fred_fabric(two_level(1.5 * TBps))), 3.75 * TBps);
}

TEST(Fabric, PathsClimbToTheCommonAncestor)
{
    auto t = build_fred_fabric(two_level(12 * TBps));
    EXPECT_EQ(fabric_path(t, 0, 1).size(), 2u);  // NPU -> L1 -> NPU
    EXPECT_EQ(fabric_path(t, 0, 19).size(), 4u); // NPU -> L1 -> L2 -> L1 -> NPU
    EXPECT_TRUE(fabric_path(t, 5, 5).empty());
    const int io = t.io_nodes.front();
    EXPECT_EQ(fabric_path(t, io, 0).size(), 2u);
}

TEST(Fabric, LeafOrderCoversEveryNpuOnce)
{
    auto t = build_fred_fabric(two_level(12 * TBps));
    auto order = leaf_order(t);
    std::set<int> seen(order.begin(), order.end());
    EXPECT_EQ(order.size(), 20u);
    EXPECT_EQ(seen.size(), 20u);
    EXPECT_EQ(order.front(), 0);
}

TEST(Fabric, ThreeLevels)
{
    FabricSpec f;
    FabricSwitchSpec root{"L3", 3, -1, 0, 0.0, {}, 0};
    f.switches.push_back(root);
    for (int a = 0; a < 2; ++a)
        f.switches.push_back({"L2." + std::to_string(a), 3, 0, 2, 6 * TBps, {}, 0});
    int npu = 0;
    for (int b = 0; b < 4; ++b)
        f.switches.push_back({"L1." + std::to_string(b), 3, 1 + b / 2, 2, 6 * TBps, {npu++, npu++}, 1});
    auto t = build_fred_fabric(f);
    EXPECT_EQ(t.fabric().levels, 3);
    EXPECT_EQ(fabric_path(t, 0, 7).size(), 6u);
    EXPECT_TRUE(npus_connected(t));
}

TEST(Fabric, RejectsMalformedSpecs)
{
    FabricSpec f = two_level(12 * TBps);
    f.switches[2].npus = {4, 5, 6, 0}; // NPU 0 attached twice
    EXPECT_THROW(build_fred_fabric(f), Error);
    FabricSpec g = two_level(12 * TBps);
    g.switches[1].uplink_lanes = 0;
    EXPECT_THROW(build_fred_fabric(g), Error);
}
