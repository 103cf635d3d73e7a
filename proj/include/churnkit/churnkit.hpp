#pragma once

// Umbrella header for the churnkit library.

#include "churnkit/cli.hpp"
#include "churnkit/dataset.hpp"
#include "churnkit/experiments.hpp"
#include "churnkit/feature_selection.hpp"
#include "churnkit/metrics.hpp"
#include "churnkit/pipeline.hpp"
#include "churnkit/preprocess.hpp"
#include "churnkit/report.hpp"
#include "churnkit/resampling.hpp"
#include "churnkit/serialization.hpp"
#include "churnkit/stats.hpp"
#include "churnkit/tuning.hpp"
