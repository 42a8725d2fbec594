#pragma once

#include "config.hpp"
#include "core.hpp"
#include "corpus.hpp"
#include "expr.hpp"
#include "green.hpp"
#include "grid.hpp"
#include "operators.hpp"
#include "report.hpp"
#include "solver.hpp"
#include "spacetime.hpp"
#include "support_sets.hpp"
#include "verify.hpp"
