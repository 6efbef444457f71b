#pragma once

#include "tailrisk/csv.hpp"
#include "tailrisk/empirical.hpp"
#include "tailrisk/experiments.hpp"
#include "tailrisk/extrapolation.hpp"
#include "tailrisk/harness.hpp"
#include "tailrisk/importance_sampling.hpp"
#include "tailrisk/loss.hpp"
#include "tailrisk/matrix.hpp"
#include "tailrisk/models.hpp"
#include "tailrisk/optimizer.hpp"
#include "tailrisk/rng.hpp"
