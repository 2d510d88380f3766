#pragma once

#include "aliboost/core/error.hpp"
#include "aliboost/core/mlp.hpp"
#include "aliboost/core/stats.hpp"
#include "aliboost/core/types.hpp"
#include "aliboost/sim/events.hpp"
#include "aliboost/sim/natural_channel.hpp"
#include "aliboost/sim/session.hpp"
#include "aliboost/sim/world.hpp"
#include "aliboost/foundation/model.hpp"
#include "aliboost/stack/features.hpp"
#include "aliboost/stack/grading.hpp"
#include "aliboost/stack/model.hpp"
#include "aliboost/tier/tier.hpp"
#include "aliboost/bid/bid.hpp"
#include "aliboost/metrics/metrics.hpp"
#include "aliboost/metrics/report.hpp"
#include "aliboost/harness/config.hpp"
#include "aliboost/harness/run.hpp"
#include "aliboost/harness/ablation.hpp"
