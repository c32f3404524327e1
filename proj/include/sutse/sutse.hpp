#pragma once

// Everything in one include.

#include "sutse/error.hpp"
#include "sutse/linalg.hpp"
#include "sutse/parallel.hpp"
#include "sutse/state_space.hpp"
#include "sutse/sutse_builder.hpp"
#include "sutse/forecast_exact.hpp"
#include "sutse/forecast_fast.hpp"
#include "sutse/sparse_cov.hpp"
#include "sutse/optimize.hpp"
#include "sutse/estimation.hpp"
#include "sutse/theory_lab.hpp"
#include "sutse/io.hpp"
#include "sutse/harness.hpp"
