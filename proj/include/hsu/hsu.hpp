#pragma once

#include "hsu/extract.hpp"
#include "hsu/geometry.hpp"
#include "hsu/io.hpp"
#include "hsu/metrics.hpp"
#include "hsu/nnls.hpp"
#include "hsu/oblique.hpp"
#include "hsu/rng.hpp"
#include "hsu/simgen.hpp"
#include "hsu/simplex.hpp"
#include "hsu/solvers.hpp"
#include "hsu/subspace.hpp"
#include "hsu/types.hpp"
