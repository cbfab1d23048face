#pragma once

#include "lasp/boundary.hpp"
#include "lasp/data.hpp"
#include "lasp/error.hpp"
#include "lasp/losses.hpp"
#include "lasp/memory.hpp"
#include "lasp/model.hpp"
#include "lasp/numerics.hpp"
#include "lasp/rng.hpp"
#include "lasp/saliency.hpp"
#include "lasp/serialize.hpp"
#include "lasp/harness/config.hpp"
#include "lasp/harness/metrics.hpp"
#include "lasp/harness/probe.hpp"
#include "lasp/harness/runner.hpp"
#include "lasp/harness/subsets.hpp"
#include "lasp/harness/trainer.hpp"
