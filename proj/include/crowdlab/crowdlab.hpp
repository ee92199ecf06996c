#pragma once

// Umbrella header: binary crowd-label aggregation rules, exact posteriors and
// EM fitting, finite-sample error-rate bound calculators, and the seeded
// Monte-Carlo harness that certifies the bounds empirically.

#include "crowdlab/bounds.hpp"
#include "crowdlab/em.hpp"
#include "crowdlab/experiments.hpp"
#include "crowdlab/format.hpp"
#include "crowdlab/io.hpp"
#include "crowdlab/label_matrix.hpp"
#include "crowdlab/montecarlo.hpp"
#include "crowdlab/params.hpp"
#include "crowdlab/rng.hpp"
#include "crowdlab/rules.hpp"
