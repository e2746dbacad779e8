#ifndef FRED_SWITCH_HPP
#define FRED_SWITCH_HPP

// Recursive FRED switch interconnect: a Clos (m, n=2, r) network whose
// micro-switches can reduce and/or distribute, built down to 2- and 3-port
// base switches.

#include "fred/error.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fred {

enum class MicroSwitchKind { R, D, RD };

inline const char* to_string(MicroSwitchKind k) noexcept
{
    switch (k) {
    case MicroSwitchKind::R: return "R";
    case MicroSwitchKind::D: return "D";
    case MicroSwitchKind::RD: return "RD";
    }
    return "?";
}

inline bool can_reduce(MicroSwitchKind k) noexcept { return k != MicroSwitchKind::D; }
inline bool can_distribute(MicroSwitchKind k) noexcept { return k != MicroSwitchKind::R; }

enum class Stage { Input, Output, Base };

struct MicroSwitch {
    int id = -1;
    Stage stage = Stage::Input;
    MicroSwitchKind kind = MicroSwitchKind::RD;
    int index = 0;                  // position within its stage
    std::array<int, 2> ports{-1, -1}; // external ports of the enclosing switch
};

enum class InternalLinkKind { InputToMiddle, MiddleToOutput, DemuxToMiddle, MiddleToMux };

struct InternalLink {
    int id = -1;
    InternalLinkKind kind = InternalLinkKind::InputToMiddle;
    int micro = -1;     // micro-switch index in its stage, -1 for adapters
    int middle = -1;    // middle subswitch index
    int middle_port = -1;
};

/// Mux/demux pair that attaches the last port of an odd-sized switch to every
/// middle subswitch.
struct OddPortAdapter {
    int port = -1;        // external port (P - 1)
    int middle_port = -1; // port r on each FRED_m(r + 1) middle subswitch
    int demux_id = -1;
    int mux_id = -1;
};

struct SwitchOptions {
    // Middle-stage subswitches with reduce/distribute capability. When off, a
    // flow that still has several ports inside a middle subswitch is a conflict.
    bool middle_reduction = true;
};

class FredSwitch {
public:
    int m = 2;
    int ports = 2;
    bool reduction_capable = true; // false only for middle levels when disabled
    std::vector<MicroSwitch> input_stage;
    std::vector<FredSwitch> middle;
    std::vector<MicroSwitch> output_stage;
    std::vector<MicroSwitch> base_elements; // base switches only
    std::optional<OddPortAdapter> odd_adapter;
    std::vector<InternalLink> internal_links;

    bool is_base() const noexcept { return middle.empty(); }
    int half() const noexcept { return ports / 2; }   // r
    bool odd() const noexcept { return ports % 2 == 1; }
    int middle_ports() const noexcept { return odd() ? half() + 1 : half(); }

    /// Number of recursive (non-base) levels: 0 for FRED_m(2) and FRED_m(3).
    int depth() const noexcept { return is_base() ? 0 : 1 + middle.front().depth(); }

    std::size_t micro_switch_count() const noexcept
    {
        std::size_t n = input_stage.size() + output_stage.size() + base_elements.size();
        for (const auto& sub : middle)
            n += sub.micro_switch_count();
        return n;
    }

    /// Index of the input (or output) micro-switch serving `port`, or -1 for
    /// the odd port that is served by the mux/demux adapter.
    int micro_of_port(int port) const noexcept
    {
        if (odd() && port == ports - 1)
            return -1;
        return port / 2;
    }

    std::string name() const { return "FRED_" + std::to_string(m) + "(" + std::to_string(ports) + ")"; }
};

namespace detail {

struct IdCounter {
    int next_micro = 0;
    int next_link = 0;
    int next_adapter = 0;
};

inline FredSwitch build_switch_rec(int m, int ports, bool reduction_capable, const SwitchOptions& opts,
                                   IdCounter& ids)
{
    FredSwitch sw;
    sw.m = m;
    sw.ports = ports;
    sw.reduction_capable = reduction_capable;

    if (ports <= 3) {
        // FRED_m(2): one RD micro-switch. FRED_m(3): three RD micro-switches
        // wired as a 3-port base crossbar.
        int count = ports == 2 ? 1 : 3;
        for (int i = 0; i < count; ++i) {
            MicroSwitch ms;
            ms.id = ids.next_micro++;
            ms.stage = Stage::Base;
            ms.kind = MicroSwitchKind::RD;
            ms.index = i;
            if (ports == 2) {
                ms.ports = {0, 1};
            } else {
                ms.ports = {i, -1};
            }
            sw.base_elements.push_back(ms);
        }
        return sw;
    }

    const int r = ports / 2;
    const bool odd = ports % 2 == 1;
    const int sub_ports = odd ? r + 1 : r;

    for (int i = 0; i < r; ++i) {
        MicroSwitch in;
        in.id = ids.next_micro++;
        in.stage = Stage::Input;
        in.kind = MicroSwitchKind::R;
        in.index = i;
        in.ports = {2 * i, 2 * i + 1};
        sw.input_stage.push_back(in);
    }
    const bool sub_capable = reduction_capable && opts.middle_reduction;
    for (int c = 0; c < m; ++c)
        sw.middle.push_back(build_switch_rec(m, sub_ports, sub_capable, opts, ids));
    for (int i = 0; i < r; ++i) {
        MicroSwitch out;
        out.id = ids.next_micro++;
        out.stage = Stage::Output;
        out.kind = MicroSwitchKind::D;
        out.index = i;
        out.ports = {2 * i, 2 * i + 1};
        sw.output_stage.push_back(out);
    }
    if (odd) {
        OddPortAdapter a;
        a.port = ports - 1;
        a.middle_port = r;
        a.demux_id = ids.next_adapter++;
        a.mux_id = ids.next_adapter++;
        sw.odd_adapter = a;
    }

    for (int i = 0; i < r; ++i)
        for (int c = 0; c < m; ++c)
            sw.internal_links.push_back({ids.next_link++, InternalLinkKind::InputToMiddle, i, c, i});
    if (odd)
        for (int c = 0; c < m; ++c)
            sw.internal_links.push_back({ids.next_link++, InternalLinkKind::DemuxToMiddle, -1, c, r});
    for (int i = 0; i < r; ++i)
        for (int c = 0; c < m; ++c)
            sw.internal_links.push_back({ids.next_link++, InternalLinkKind::MiddleToOutput, i, c, i});
    if (odd)
        for (int c = 0; c < m; ++c)
            sw.internal_links.push_back({ids.next_link++, InternalLinkKind::MiddleToMux, -1, c, r});
    return sw;
}

} // namespace detail

/// Builds FRED_m(P). Ids of micro-switches, adapters and internal links are
/// assigned in depth-first construction order and are stable across calls.
inline FredSwitch build_fred_switch(int m, int ports, SwitchOptions opts = {})
{
    require(m >= 2, ErrorKind::Constraint, "FRED switch needs m >= 2 middle subswitches, got " + std::to_string(m));
    require(ports >= 2, ErrorKind::Constraint, "FRED switch needs P >= 2 ports, got " + std::to_string(ports));
    detail::IdCounter ids;
    return detail::build_switch_rec(m, ports, true, opts, ids);
}

} // namespace fred

#endif // FRED_SWITCH_HPP
