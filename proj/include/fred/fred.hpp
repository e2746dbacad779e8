#ifndef FRED_FRED_HPP
#define FRED_FRED_HPP

#include "fred/error.hpp"
#include "fred/switch.hpp"
#include "fred/topology.hpp"
#include "fred/routing.hpp"
#include "fred/collectives.hpp"
#include "fred/workload.hpp"
#include "fred/placement.hpp"
#include "fred/sim.hpp"
#include "fred/scenario.hpp"

#endif // FRED_FRED_HPP
