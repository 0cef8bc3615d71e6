#pragma once

// Umbrella header: contract-design toolkit and market simulator for
// broker-based spectrum reservation under stochastic demand.

#include "specres/aggregate.hpp"
#include "specres/contract.hpp"
#include "specres/distribution.hpp"
#include "specres/experiment.hpp"
#include "specres/market.hpp"
#include "specres/math.hpp"
#include "specres/sim.hpp"
