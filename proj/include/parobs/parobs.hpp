#pragma once

// Umbrella header for the space-time least-squares obstacle-problem solver.

#include "adaptive.hpp"
#include "assembly.hpp"
#include "core.hpp"
#include "estimator.hpp"
#include "fespace.hpp"
#include "mesh.hpp"
#include "problem.hpp"
#include "quadrature.hpp"
#include "solver.hpp"
#include "study.hpp"
