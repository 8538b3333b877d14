#pragma once

#include "dapmm/datagen.hpp"
#include "dapmm/dynamics.hpp"
#include "dapmm/error.hpp"
#include "dapmm/experiments.hpp"
#include "dapmm/features.hpp"
#include "dapmm/grid.hpp"
#include "dapmm/gsum.hpp"
#include "dapmm/metrics.hpp"
#include "dapmm/nn.hpp"
#include "dapmm/rules.hpp"
#include "dapmm/selector.hpp"
