#pragma once

#include "byzweight/aggregate.hpp"
#include "byzweight/dataset.hpp"
#include "byzweight/error.hpp"
#include "byzweight/experiment.hpp"
#include "byzweight/model.hpp"
#include "byzweight/objective.hpp"
#include "byzweight/rational.hpp"
#include "byzweight/rng.hpp"
#include "byzweight/sample_check.hpp"
#include "byzweight/simulation.hpp"
#include "byzweight/weights.hpp"
