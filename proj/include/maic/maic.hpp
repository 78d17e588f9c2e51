// Umbrella header.
#ifndef MAIC_MAIC_HPP
#define MAIC_MAIC_HPP

#include "maic/bootstrap.hpp"
#include "maic/data_model.hpp"
#include "maic/error.hpp"
#include "maic/estimation.hpp"
#include "maic/maic_weights.hpp"
#include "maic/methods.hpp"
#include "maic/metrics.hpp"
#include "maic/normal.hpp"
#include "maic/propensity.hpp"
#include "maic/rng.hpp"
#include "maic/simulation.hpp"

#endif  // MAIC_MAIC_HPP
