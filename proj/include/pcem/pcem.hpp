#pragma once

// Strong predictor-corrector Euler-Maruyama toolkit for stochastic
// differential equations with Markovian switching: regime-chain simulation,
// the two-stage scheme family, coupled-path strong-error measurement and
// moment-stability analysis.

#include "pcem/analysis.hpp"
#include "pcem/config.hpp"
#include "pcem/csv.hpp"
#include "pcem/ctmc.hpp"
#include "pcem/errors.hpp"
#include "pcem/experiments.hpp"
#include "pcem/models.hpp"
#include "pcem/parallel.hpp"
#include "pcem/quadrature.hpp"
#include "pcem/rng.hpp"
#include "pcem/schemes.hpp"
#include "pcem/simulate.hpp"
#include "pcem/time_grid.hpp"
