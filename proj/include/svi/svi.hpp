#pragma once

#include "svi/core.hpp"
#include "svi/rng.hpp"
#include "svi/convex_analysis.hpp"
#include "svi/stochastic_drivers.hpp"
#include "svi/path_segments.hpp"
#include "svi/problem.hpp"
#include "svi/integrator.hpp"
#include "svi/galerkin.hpp"
#include "svi/averaging.hpp"
#include "svi/parallel.hpp"
#include "svi/properties.hpp"
#include "svi/report.hpp"
#include "svi/studies.hpp"
#include "svi/config.hpp"
#include "svi/harness.hpp"
