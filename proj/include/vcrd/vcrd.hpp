#pragma once

// SPDX-License-Identifier: Apache-2.0

// Umbrella header for the whole library.

#include "vcrd/ablation.hpp"
#include "vcrd/analysis.hpp"
#include "vcrd/categorical.hpp"
#include "vcrd/checkpoint.hpp"
#include "vcrd/config.hpp"
#include "vcrd/divergence.hpp"
#include "vcrd/judge.hpp"
#include "vcrd/loss.hpp"
#include "vcrd/metrics.hpp"
#include "vcrd/pipeline.hpp"
#include "vcrd/policy.hpp"
#include "vcrd/rng.hpp"
#include "vcrd/tasks.hpp"
#include "vcrd/trainer.hpp"
#include "vcrd/trust_region.hpp"
#include "vcrd/weights.hpp"
