#ifndef FRED_TESTS_SUPPORT_HPP
#define FRED_TESTS_SUPPORT_HPP

#include "fred/routing.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

namespace fred::testing {

inline std::vector<Flow> permutation_epoch(const std::vector<int>& perm)
{
    std::vector<Flow> flows;
    for (int i = 0; i < static_cast<int>(perm.size()); ++i)
        flows.push_back(make_flow(i, {i}, {perm[i]}));
    return flows;
}

inline std::vector<int> random_permutation(int n, std::mt19937& rng)
{
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), rng);
    return p;
}

inline PortValues random_vectors(int ports, std::mt19937& rng, int len = 3)
{
    std::uniform_int_distribution<std::int64_t> d(-1000, 1000);
    PortValues v(ports);
    for (auto& x : v) {
        Vec e(len);
        for (auto& y : e)
            y = d(rng);
        x = e;
    }
    return v;
}

/// Random port-disjoint multicast/reduce flows; every port is used at most
/// once as input and once as output.
inline std::vector<Flow> random_epoch(int ports, std::mt19937& rng, int max_fan = 3)
{
    std::vector<int> ins(ports), outs(ports);
    std::iota(ins.begin(), ins.end(), 0);
    std::iota(outs.begin(), outs.end(), 0);
    std::shuffle(ins.begin(), ins.end(), rng);
    std::shuffle(outs.begin(), outs.end(), rng);
    std::uniform_int_distribution<int> fan(1, max_fan);
    std::vector<Flow> flows;
    std::size_t a = 0, b = 0;
    int id = 0;
    while (a < ins.size() && b < outs.size()) {
        const std::size_t ni = std::min<std::size_t>(fan(rng), ins.size() - a);
        const std::size_t no = std::min<std::size_t>(fan(rng), outs.size() - b);
        Flow f = make_flow(id++, {ins.begin() + a, ins.begin() + a + ni}, {outs.begin() + b, outs.begin() + b + no});
        a += ni;
        b += no;
        flows.push_back(f);
    }
    return normalize_epoch(flows, ports);
}

} // namespace fred::testing

#endif // FRED_TESTS_SUPPORT_HPP
