#pragma once

// Umbrella header for the core library. The config layer (experiment.hpp)
// needs the vendored json.hpp and is included separately.

#include "fconvex/numerics.hpp"
#include "fconvex/hot.hpp"
#include "fconvex/ftransform.hpp"
#include "fconvex/gtransform.hpp"
#include "fconvex/criteria.hpp"
#include "fconvex/grid.hpp"
#include "fconvex/heatflow.hpp"
#include "fconvex/certify.hpp"
