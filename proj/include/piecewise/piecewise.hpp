#pragma once

#include "piecewise/core.hpp"
#include "piecewise/graph.hpp"
#include "piecewise/inference.hpp"
#include "piecewise/objectives.hpp"
#include "piecewise/optimizer.hpp"
#include "piecewise/crf.hpp"
#include "piecewise/data.hpp"
#include "piecewise/commands.hpp"
