// Prints one PASS/FAIL line per acceptance criterion; exits nonzero on any FAIL.

#include "fred/fred.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

using namespace fred;
using namespace fred::testing;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double time_limit, const std::function<Outcome()>& body)
{
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > time_limit) {
        o.ok = false;
        o.detail += " (took " + std::to_string(secs) + " s, limit " + std::to_string(time_limit) + " s)";
    }
    if (!o.ok)
        ++failures;
    std::printf("%s %2d %s: %s [%.2f s]\n", o.ok ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::vector<int> range(int n)
{
    std::vector<int> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

Outcome mesh_hotspot()
{
    Outcome o;
    for (int n : {3, 4, 5, 6}) {
        auto t = build_mesh(n, n, 750 * GBps, border_io_attachments(n, n));
        auto cl = max_channel_load(io_broadcast_demands(t, 128 * GBps), t, CollectiveMode::Endpoint, 128 * GBps);
        o.ok = o.ok && cl.hotspot_factor == 2.0 * n - 1;
        o.detail += std::to_string(n) + "x" + std::to_string(n) + "=" + fmt("%g", cl.hotspot_factor) + " ";
    }
    return o;
}

Outcome traffic_ratio()
{
    Outcome o;
    auto fab = platform_preset("FRED-D").build();
    double at20 = 0.0;
    for (int n = 2; n <= 20; ++n) {
        const std::uint64_t d = 20ull * 19 * 18 * 17 * 16; // divisible by every n
        CollectivePattern p{CollectiveKind::AllReduce, range(n), {}, d};
        CollectivePlan ring;
        ring.steps = detail::ring_all_reduce(range(n), 0, d, +1, ReduceOp::Sum);
        const auto r = total_injected(ring);
        const auto innet = total_injected(plan_collective(p, fab, CollectiveMode::InNetwork));
        // exact in integers: ring * n == in-network * 2(n-1)
        if (r * n != innet * 2 * (n - 1)) {
            o.ok = false;
            o.detail += "N=" + std::to_string(n) + " mismatch; ";
        }
        if (n == 20)
            at20 = static_cast<double>(r) / static_cast<double>(innet);
    }
    o.ok = o.ok && at20 == 1.9 && std::abs(at20 - 2.0) <= 0.05 * 2.0 + 1e-12;
    o.detail += "ratio at N=20 " + fmt("%.4f", at20);
    return o;
}

Outcome io_scaling()
{
    const double base = io_rate_scale(platform_preset("Baseline").build(), 128 * GBps, CollectiveMode::Endpoint);
    const double c = io_rate_scale(platform_preset("FRED-C").build(), 128 * GBps, CollectiveMode::Endpoint);
    const double d = io_rate_scale(platform_preset("FRED-D").build(), 128 * GBps, CollectiveMode::InNetwork);
    Outcome o;
    o.ok = std::abs(base - 0.651) <= 0.001 && c == 1.0 && d == 1.0;
    o.detail = "baseline " + fmt("%.6f", base) + ", FRED-C " + fmt("%g", c) + ", FRED-D " + fmt("%g", d);
    return o;
}

Outcome non_blocking()
{
    std::mt19937 rng(20260101);
    Outcome o;
    auto routes = [&](const std::vector<Flow>& flows, const FredSwitch& sw) {
        auto r = route(flows, sw);
        return r.ok() && validate_assignment(r.assignment(), flows, sw, random_vectors(sw.ports, rng, 1)).ok;
    };
    int exhaustive = 0;
    auto sw4 = build_fred_switch(2, 4);
    std::vector<int> p{0, 1, 2, 3};
    do
        exhaustive += routes(permutation_epoch(p), sw4);
    while (std::next_permutation(p.begin(), p.end()));
    o.ok = exhaustive == 24;
    o.detail = "FRED_2(4) " + std::to_string(exhaustive) + "/24";
    for (int ports : {8, 16}) {
        auto sw = build_fred_switch(2, ports);
        int ok = 0;
        for (int k = 0; k < 10000; ++k)
            ok += routes(permutation_epoch(random_permutation(ports, rng)), sw);
        o.ok = o.ok && ok == 10000;
        o.detail += ", FRED_2(" + std::to_string(ports) + ") " + std::to_string(ok) + "/10000";
    }
    int admitted = 0;
    for (int seq = 0; seq < 1000; ++seq) {
        IncrementalRouter r(build_fred_switch(3, 8));
        std::vector<int> in = random_permutation(8, rng), out = random_permutation(8, rng);
        std::vector<std::pair<int, int>> live;
        bool all = true;
        int next = 0;
        // arrivals until full, then random departures and arrivals
        for (int ev = 0; ev < 32 && all; ++ev) {
            if (!live.empty() && (in.empty() || rng() % 3 == 0)) {
                auto k = rng() % live.size();
                r.remove(live[k].first);
                in.push_back(live[k].second / 8);
                out.push_back(live[k].second % 8);
                live.erase(live.begin() + static_cast<std::ptrdiff_t>(k));
                continue;
            }
            auto a = rng() % in.size(), b = rng() % out.size();
            Flow f = make_flow(next++, {in[a]}, {out[b]});
            all = r.add(f);
            live.push_back({f.id, in[a] * 8 + out[b]});
            in.erase(in.begin() + static_cast<std::ptrdiff_t>(a));
            out.erase(out.begin() + static_cast<std::ptrdiff_t>(b));
        }
        admitted += all;
    }
    o.ok = o.ok && admitted == 1000;
    o.detail += ", FRED_3(8) incremental " + std::to_string(admitted) + "/1000";
    return o;
}

Outcome routing_figures()
{
    std::vector<Flow> three{make_flow(0, {0, 2}, {0, 2}), make_flow(1, {1, 4}, {1, 4}), make_flow(2, {3, 6}, {3, 6})};
    std::vector<Flow> four{make_flow(0, {0, 2}, {0, 2}), make_flow(1, {1, 4}, {1, 4}), make_flow(2, {3, 5}, {3, 5}),
                           make_flow(3, {6, 7}, {6, 7})};
    const bool i_m2 = route(three, build_fred_switch(2, 8)).ok();
    const bool j_m2 = route(four, build_fred_switch(2, 8)).ok();
    const bool j_m3 = route(four, build_fred_switch(3, 8)).ok();
    Outcome o;
    o.ok = i_m2 && !j_m2 && j_m3;
    o.detail = std::string("three-flow m=2 ") + (i_m2 ? "routes" : "fails") + ", four-flow m=2 " +
               (j_m2 ? "routes" : "fails") + ", four-flow m=3 " + (j_m3 ? "routes" : "fails");
    return o;
}

Outcome placement()
{
    auto t = platform_preset("FRED-D").build();
    int checked = 0, ok = 0;
    std::string first_bad;
    for (int mp = 1; mp <= 20; ++mp)
        for (int dp = 1; mp * dp <= 20; ++dp)
            for (int pp = 1; mp * dp * pp <= 20; ++pp) {
                ParallelStrategy s{mp, dp, pp};
                auto rep = verify_conflict_free(place_fred(s, t), t);
                ++checked;
                ok += rep.ok;
                if (!rep.ok && first_bad.empty())
                    first_bad = s.name() + ": " + rep.message;
            }
    return {ok == checked, std::to_string(ok) + "/" + std::to_string(checked) + " strategies conflict-free" +
                               (first_bad.empty() ? "" : "; " + first_bad)};
}

Outcome collective_oracle()
{
    std::mt19937 rng(777);
    const std::uint64_t len = 24;
    const std::vector<CollectiveKind> kinds{CollectiveKind::Unicast,       CollectiveKind::Multicast,
                                            CollectiveKind::Reduce,        CollectiveKind::AllReduce,
                                            CollectiveKind::ReduceScatter, CollectiveKind::AllGather,
                                            CollectiveKind::Scatter,       CollectiveKind::Gather,
                                            CollectiveKind::AllToAll};
    auto fred_b = platform_preset("FRED-B").build();
    auto mesh = platform_preset("Baseline").build();
    auto sw8 = build_fred_switch(3, 8);
    int cases = 0, good = 0;
    std::string first_bad;
    for (int round = 0; round < 40; ++round)
        for (auto kind : kinds)
            for (int target = 0; target < 3; ++target) {
                const int pool = target == 0 ? 8 : 20;
                std::size_t n = 2 + rng() % 7;
                if (kind == CollectiveKind::AllToAll)
                    while (len % n)
                        --n;
                auto members = random_permutation(pool, rng);
                members.resize(n);
                CollectivePattern p;
                p.kind = kind;
                p.bytes = len;
                p.op = static_cast<ReduceOp>(rng() % 3);
                if (kind == CollectiveKind::Unicast || kind == CollectiveKind::Multicast) {
                    p.participants = {members[0]};
                    p.targets.assign(members.begin() + 1, kind == CollectiveKind::Unicast ? members.begin() + 2
                                                                                          : members.end());
                } else {
                    p.participants = members;
                    if (kind == CollectiveKind::Reduce || kind == CollectiveKind::Scatter ||
                        kind == CollectiveKind::Gather)
                        p.targets = {members[rng() % n]};
                }
                Buffers in;
                std::uniform_int_distribution<std::int64_t> v(-99, 99);
                for (int x = 0; x < pool; ++x) {
                    Vec b(len);
                    for (auto& e : b)
                        e = v(rng);
                    in[x] = b;
                }
                Buffers out;
                if (target == 0)
                    out = execute_plan(is_simple(kind) ? plan_simple(p, 8) : plan_compound(p, 8), in, &sw8);
                else if (target == 1)
                    out = execute_plan(plan_collective(p, fred_b, CollectiveMode::InNetwork), in, nullptr, &fred_b);
                else
                    out = execute_plan(plan_mesh_collective(p, mesh), in);
                auto err = check_result(reference_result(p, in), out);
                ++cases;
                good += err.empty();
                if (!err.empty() && first_bad.empty())
                    first_bad = std::string(to_string(kind)) + ": " + err;
            }
    return {good == cases && cases >= 1000,
            std::to_string(good) + "/" + std::to_string(cases) + " cases exact" +
                (first_bad.empty() ? "" : "; " + first_bad)};
}

Outcome microbenchmark()
{
    const std::uint64_t gb = 1000000000ull;
    const double base = wafer_all_reduce_bandwidth(platform_preset("Baseline"), gb).per_npu / GBps;
    const double a = wafer_all_reduce_bandwidth(platform_preset("FRED-A"), gb).per_npu / GBps;
    const double c = wafer_all_reduce_bandwidth(platform_preset("FRED-C"), gb).per_npu / GBps;
    Outcome o;
    o.ok = std::abs(base - 1500) <= 150 && std::abs(c - 3000) <= 300 && a >= 1750 && a <= 1950;
    o.detail = "Baseline " + fmt("%.1f", base) + " GBps, FRED-A " + fmt("%.1f", a) + " GBps, FRED-C " +
               fmt("%.1f", c) + " GBps";
    return o;
}

std::map<std::string, std::vector<ComparisonRow>> comparisons;

Outcome end_to_end()
{
    std::vector<PlatformSpec> platforms;
    for (const char* n : {"Baseline", "FRED-C", "FRED-D"})
        platforms.push_back(platform_preset(n));
    Outcome o;
    for (const auto& w : workload_names()) {
        auto rows = run_comparison(platforms, workload_preset(w));
        const auto &b = rows[0].report, &c = rows[1].report, &d = rows[2].report;
        const bool order = d.total <= c.total && c.total <= b.total;
        o.ok = o.ok && order;
        o.detail += w + " " + fmt("%.3fx", rows[1].speedup) + "/" + fmt("%.3fx", rows[2].speedup) +
                    (order ? "" : " ORDER VIOLATED") + "; ";
        if (w == "ResNet-152") {
            const bool dp = d.exposed_of(Category::DP) < c.exposed_of(Category::DP);
            o.ok = o.ok && dp;
            o.detail += std::string("DP exposed D<C ") + (dp ? "yes" : "no") + "; ";
        }
        if (w == "Transformer-1T") {
            auto io = [](const SimReport& r) {
                return r.exposed_of(Category::Streaming) + r.exposed_of(Category::InputLoad);
            };
            for (const SimReport* f : {&c, &d}) {
                const double share = (io(b) - io(*f)) / (b.total - f->total);
                o.ok = o.ok && share >= 0.9;
                o.detail += "I/O share of gap vs " + f->platform + " " + fmt("%.3f", share) + "; ";
            }
        }
    }
    return o;
}

std::string full_comparison_csv()
{
    std::vector<PlatformSpec> platforms;
    for (const auto& n : platform_names())
        platforms.push_back(platform_preset(n));
    std::string csv = comparison_csv_header();
    for (const auto& w : workload_names())
        csv += comparison_csv_rows(run_comparison(platforms, workload_preset(w)));
    return csv;
}

Outcome determinism()
{
    const auto a = full_comparison_csv();
    const auto b = full_comparison_csv();
    return {a == b, std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "different")};
}

} // namespace

int main()
{
    criterion(1, "mesh I/O hotspot is 2N-1", 1, mesh_hotspot);
    criterion(2, "ring vs in-network traffic is 2(N-1)/N", 1, traffic_ratio);
    criterion(3, "I/O rate scale", 1, io_scaling);
    criterion(4, "non-blocking routing", 120, non_blocking);
    criterion(5, "routing figure epochs", 1, routing_figures);
    criterion(6, "placement conflict-freedom", 60, placement);
    criterion(7, "collective functional oracle", 60, collective_oracle);
    criterion(8, "wafer-wide All-Reduce effective bandwidth", 60, microbenchmark);
    criterion(9, "end-to-end ordering", 300, end_to_end);
    criterion(10, "compare output determinism", 60, determinism);
    std::printf("%s: %d of 10 criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
