#pragma once

#include "cesium/core.hpp"
#include "cesium/error.hpp"
#include "cesium/features.hpp"
#include "cesium/featurize.hpp"
#include "cesium/graph.hpp"
#include "cesium/learn/model.hpp"
#include "cesium/lomb_scargle.hpp"
#include "cesium/persist/featureset_io.hpp"
#include "cesium/persist/model_io.hpp"
#include "cesium/persist/predictions_io.hpp"
#include "cesium/persist/recipe.hpp"
#include "cesium/wavelet.hpp"
#include "cesium/workflow.hpp"
