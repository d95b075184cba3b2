#pragma once

#include "wardforge/errors.hpp"
#include "wardforge/matrix.hpp"
#include "wardforge/elliptic.hpp"
#include "wardforge/mero_expr.hpp"
#include "wardforge/extended_solution.hpp"
#include "wardforge/backlund.hpp"
#include "wardforge/recipes.hpp"
#include "wardforge/verifier.hpp"
