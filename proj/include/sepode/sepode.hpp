#pragma once

// Separable nonlinear least-squares estimation for ODE systems:
// smoothing-based integral criterion, variable projection of the linear
// parameter block, benchmark models, and the Monte-Carlo harness.

#include "sepode/criterion.hpp"
#include "sepode/harness.hpp"
#include "sepode/integrate.hpp"
#include "sepode/models.hpp"
#include "sepode/optimize.hpp"
#include "sepode/quadrature.hpp"
#include "sepode/rng.hpp"
#include "sepode/smoothing.hpp"
#include "sepode/spline.hpp"
#include "sepode/types.hpp"
