#pragma once

#include "heavytouch/autotune.hpp"
#include "heavytouch/check_counter.hpp"
#include "heavytouch/core.hpp"
#include "heavytouch/distribution.hpp"
#include "heavytouch/experiment.hpp"
#include "heavytouch/generators.hpp"
#include "heavytouch/projections.hpp"
#include "heavytouch/rng.hpp"
#include "heavytouch/solvers.hpp"
