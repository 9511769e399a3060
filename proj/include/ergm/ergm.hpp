#pragma once

#include "ergm/errors.hpp"
#include "ergm/network.hpp"
#include "ergm/rng.hpp"
#include "ergm/model.hpp"
#include "ergm/edgelist.hpp"
#include "ergm/pseudolikelihood.hpp"
#include "ergm/sampler.hpp"
#include "ergm/diagnostics.hpp"
#include "ergm/mcmle.hpp"
#include "ergm/annealer.hpp"
#include "ergm/exact.hpp"
