#pragma once

// Everything in the library.

#include "s2wb/errors.hpp"
#include "s2wb/tolerances.hpp"
#include "s2wb/sym_core.hpp"
#include "s2wb/sigma2_op.hpp"
#include "s2wb/rng.hpp"
#include "s2wb/parallel.hpp"
#include "s2wb/jacobi_cert.hpp"
#include "s2wb/legendre_lewy.hpp"
#include "s2wb/grid.hpp"
#include "s2wb/linear_solve.hpp"
#include "s2wb/fd_solver.hpp"
#include "s2wb/grid_transform.hpp"
#include "s2wb/superharmonicity.hpp"
#include "s2wb/experiments.hpp"
#include "s2wb/report.hpp"
#include "s2wb/commands.hpp"
