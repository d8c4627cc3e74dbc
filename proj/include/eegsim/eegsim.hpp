#pragma once

// Umbrella header.
#include "config.hpp"
#include "connectivity.hpp"
#include "errors.hpp"
#include "filters.hpp"
#include "forward_model.hpp"
#include "linalg.hpp"
#include "matrix_io.hpp"
#include "metrics.hpp"
#include "model_json.hpp"
#include "mvar.hpp"
#include "pipeline.hpp"
#include "random.hpp"
#include "source_model.hpp"
