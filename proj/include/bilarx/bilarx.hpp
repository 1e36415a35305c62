#ifndef BILARX_BILARX_HPP
#define BILARX_BILARX_HPP

#include "bilarx/core.hpp"
#include "bilarx/problem.hpp"
#include "bilarx/prox.hpp"
#include "bilarx/extract.hpp"
#include "bilarx/solver.hpp"
#include "bilarx/analysis.hpp"
#include "bilarx/baseline.hpp"
#include "bilarx/datagen.hpp"

#endif  // BILARX_BILARX_HPP
