#pragma once

// Umbrella header.

#include "graphmore/config.hpp"
#include "graphmore/curvature.hpp"
#include "graphmore/diffcore.hpp"
#include "graphmore/experts.hpp"
#include "graphmore/fdcheck.hpp"
#include "graphmore/gating.hpp"
#include "graphmore/graph.hpp"
#include "graphmore/log.hpp"
#include "graphmore/manifold.hpp"
#include "graphmore/metrics.hpp"
#include "graphmore/mixture.hpp"
#include "graphmore/report.hpp"
#include "graphmore/split.hpp"
#include "graphmore/synthetic.hpp"
#include "graphmore/training.hpp"
