#pragma once

// Umbrella header for the homodyne tomography library.

#include "tomo/binning.hpp"
#include "tomo/experiment.hpp"
#include "tomo/fock.hpp"
#include "tomo/mle.hpp"
#include "tomo/povm.hpp"
#include "tomo/rng.hpp"
#include "tomo/sampler.hpp"
#include "tomo/states.hpp"
