#pragma once

#include "obstacle/analysis.hpp"
#include "obstacle/config.hpp"
#include "obstacle/disparity.hpp"
#include "obstacle/error.hpp"
#include "obstacle/evaluation.hpp"
#include "obstacle/flow.hpp"
#include "obstacle/image.hpp"
#include "obstacle/mask.hpp"
#include "obstacle/parallel.hpp"
#include "obstacle/render.hpp"
#include "obstacle/synth.hpp"
#include "obstacle/types.hpp"
