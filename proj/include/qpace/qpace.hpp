#pragma once

// Umbrella header: self-paced curriculum training for spatio-temporal
// quantile forecasting, plus the experiment harness around it.

#include "qpace/adam.hpp"
#include "qpace/batching.hpp"
#include "qpace/config.hpp"
#include "qpace/curriculum.hpp"
#include "qpace/dataset.hpp"
#include "qpace/efficiency.hpp"
#include "qpace/errors.hpp"
#include "qpace/forecaster.hpp"
#include "qpace/fusion.hpp"
#include "qpace/gradcheck.hpp"
#include "qpace/loss.hpp"
#include "qpace/metrics.hpp"
#include "qpace/random.hpp"
#include "qpace/report_io.hpp"
#include "qpace/serialize.hpp"
#include "qpace/tensor.hpp"
#include "qpace/training.hpp"
