#pragma once

#include "beamtrack/angular_grid.hpp"
#include "beamtrack/baselines.hpp"
#include "beamtrack/codebook.hpp"
#include "beamtrack/config.hpp"
#include "beamtrack/geometry.hpp"
#include "beamtrack/io.hpp"
#include "beamtrack/mobility.hpp"
#include "beamtrack/policy.hpp"
#include "beamtrack/posterior.hpp"
#include "beamtrack/quadrature.hpp"
#include "beamtrack/sim.hpp"
#include "beamtrack/special_functions.hpp"
#include "beamtrack/svg.hpp"
