#pragma once

#include "feakm/align.hpp"
#include "feakm/cli.hpp"
#include "feakm/config.hpp"
#include "feakm/eval.hpp"
#include "feakm/fusion.hpp"
#include "feakm/geometry.hpp"
#include "feakm/grid.hpp"
#include "feakm/io.hpp"
#include "feakm/keypoint.hpp"
#include "feakm/matcher.hpp"
#include "feakm/parallel.hpp"
#include "feakm/pipeline.hpp"
#include "feakm/protocol.hpp"
#include "feakm/rng.hpp"
#include "feakm/scene.hpp"
#include "feakm/sweep.hpp"
