#include "fred/switch.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <set>

using namespace fred;

namespace {

// Checks the port bookkeeping of one recursion level and all below it.
void check_level(const FredSwitch& sw)
{
    if (sw.is_base()) {
        EXPECT_LE(sw.ports, 3);
        for (const auto& e : sw.base_elements)
            EXPECT_EQ(e.kind, MicroSwitchKind::RD);
        return;
    }
    const int r = sw.half();
    ASSERT_EQ(static_cast<int>(sw.input_stage.size()), r);
    ASSERT_EQ(static_cast<int>(sw.output_stage.size()), r);
    ASSERT_EQ(static_cast<int>(sw.middle.size()), sw.m);
    EXPECT_EQ(sw.odd_adapter.has_value(), sw.odd());

    // every external port is served exactly once on each side
    std::set<int> in_ports, out_ports;
    for (const auto& ms : sw.input_stage) {
        EXPECT_EQ(ms.kind, MicroSwitchKind::R);
        in_ports.insert(ms.ports.begin(), ms.ports.end());
    }
    for (const auto& ms : sw.output_stage) {
        EXPECT_EQ(ms.kind, MicroSwitchKind::D);
        out_ports.insert(ms.ports.begin(), ms.ports.end());
    }
    if (sw.odd_adapter) {
        in_ports.insert(sw.odd_adapter->port);
        out_ports.insert(sw.odd_adapter->port);
    }
    EXPECT_EQ(static_cast<int>(in_ports.size()), sw.ports);
    EXPECT_EQ(static_cast<int>(out_ports.size()), sw.ports);

    // ports fanned into the middle stage equal the middle switches' ports
    int fanned_in = 0, middle_total = 0;
    for (const auto& l : sw.internal_links)
        if (l.kind == InternalLinkKind::InputToMiddle || l.kind == InternalLinkKind::DemuxToMiddle)
            ++fanned_in;
    for (const auto& sub : sw.middle) {
        EXPECT_EQ(sub.ports, sw.middle_ports());
        middle_total += sub.ports;
        check_level(sub);
    }
    EXPECT_EQ(fanned_in, middle_total);
}

} // namespace

TEST(Switch, DepthIsLogMinusOneForPowersOfTwo)
{
    for (int p : {2, 4, 8, 16}) {
        int log2p = 0;
        while ((1 << log2p) < p)
            ++log2p;
        EXPECT_EQ(build_fred_switch(2, p).depth(), log2p - 1) << "P=" << p;
        EXPECT_EQ(build_fred_switch(3, p).depth(), log2p - 1) << "P=" << p;
    }
}

TEST(Switch, PortConservationAtEveryLevel)
{
    for (int m : {2, 3, 4})
        for (int p = 2; p <= 21; ++p) {
            SCOPED_TRACE("m=" + std::to_string(m) + " P=" + std::to_string(p));
            check_level(build_fred_switch(m, p));
        }
}

TEST(Switch, BaseCases)
{
    auto two = build_fred_switch(2, 2);
    EXPECT_TRUE(two.is_base());
    EXPECT_EQ(two.micro_switch_count(), 1u);
    auto three = build_fred_switch(3, 3);
    EXPECT_TRUE(three.is_base());
    EXPECT_EQ(three.depth(), 0);
}

TEST(Switch, OddSizeUsesAdapterOnLastPort)
{
    auto sw = build_fred_switch(2, 5);
    ASSERT_TRUE(sw.odd_adapter.has_value());
    EXPECT_EQ(sw.odd_adapter->port, 4);
    EXPECT_EQ(sw.odd_adapter->middle_port, 2);
    EXPECT_EQ(sw.micro_of_port(4), -1);
    EXPECT_EQ(sw.micro_of_port(3), 1);
    for (const auto& sub : sw.middle)
        EXPECT_EQ(sub.ports, 3);
}

TEST(Switch, MicroSwitchCountsMatchRecurrence)
{
    // C(P) = 2r + m C(r') with base C(2) = 1, C(3) = 3
    std::function<std::size_t(int, int)> count = [&](int m, int p) -> std::size_t {
        if (p == 2)
            return 1;
        if (p == 3)
            return 3;
        const int r = p / 2;
        return static_cast<std::size_t>(2 * r) + static_cast<std::size_t>(m) * count(m, p % 2 ? r + 1 : r);
    };
    for (int m : {2, 3})
        for (int p = 2; p <= 32; ++p)
            EXPECT_EQ(build_fred_switch(m, p).micro_switch_count(), count(m, p)) << m << "," << p;
}

TEST(Switch, IdsAreStableAcrossBuilds)
{
    auto a = build_fred_switch(3, 13);
    auto b = build_fred_switch(3, 13);
    ASSERT_EQ(a.internal_links.size(), b.internal_links.size());
    for (std::size_t i = 0; i < a.internal_links.size(); ++i)
        EXPECT_EQ(a.internal_links[i].id, b.internal_links[i].id);
    EXPECT_EQ(a.middle[2].input_stage[0].id, b.middle[2].input_stage[0].id);
}

TEST(Switch, MiddleReductionOption)
{
    SwitchOptions off;
    off.middle_reduction = false;
    auto sw = build_fred_switch(2, 8, off);
    EXPECT_TRUE(sw.reduction_capable);
    for (const auto& sub : sw.middle)
        EXPECT_FALSE(sub.reduction_capable);
}

TEST(Switch, RejectsBadParameters)
{
    EXPECT_THROW(build_fred_switch(1, 8), Error);
    EXPECT_THROW(build_fred_switch(2, 1), Error);
    try {
        build_fred_switch(1, 8);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Constraint);
    }
}
