// Umbrella header.

#pragma once

#include "tvsnr/schedule.hpp"
#include "tvsnr/sde.hpp"
#include "tvsnr/quadrature.hpp"
#include "tvsnr/mixture.hpp"
#include "tvsnr/rng.hpp"
#include "tvsnr/grid.hpp"
#include "tvsnr/solvers.hpp"
#include "tvsnr/analysis.hpp"
#include "tvsnr/io.hpp"
