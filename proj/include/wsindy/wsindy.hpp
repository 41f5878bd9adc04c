#pragma once

// Weak-form identification of mean-field dynamics from interacting-particle
// trajectories: simulation, density estimation, weak-system assembly, sparse
// regression, and scoring.

#include "wsindy/assembly.hpp"
#include "wsindy/dataset.hpp"
#include "wsindy/experiment.hpp"
#include "wsindy/fft.hpp"
#include "wsindy/grid.hpp"
#include "wsindy/library.hpp"
#include "wsindy/metrics.hpp"
#include "wsindy/models.hpp"
#include "wsindy/mstls.hpp"
#include "wsindy/report.hpp"
#include "wsindy/rng.hpp"
#include "wsindy/simulate.hpp"
#include "wsindy/test_functions.hpp"
#include "wsindy/types.hpp"

#define WSINDY_VERSION "0.1.0"
