#pragma once

// Umbrella header.

#include "itrcr/curves.hpp"
#include "itrcr/evalbench.hpp"
#include "itrcr/forest.hpp"
#include "itrcr/itr.hpp"
#include "itrcr/sim.hpp"
#include "itrcr/splitstats.hpp"
#include "itrcr/survdata.hpp"
