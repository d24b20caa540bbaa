#pragma once

// Umbrella header.

#include "bounds.hpp"
#include "config.hpp"
#include "error.hpp"
#include "estimate.hpp"
#include "fixtures.hpp"
#include "harness.hpp"
#include "io.hpp"
#include "lipnet.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "spaceform.hpp"
#include "types.hpp"
