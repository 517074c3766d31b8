#pragma once

#include "vpflow/compactify.hpp"
#include "vpflow/core.hpp"
#include "vpflow/diagnostics.hpp"
#include "vpflow/eulerian.hpp"
#include "vpflow/fields.hpp"
#include "vpflow/flow.hpp"
#include "vpflow/grid.hpp"
#include "vpflow/io.hpp"
#include "vpflow/kernels.hpp"
#include "vpflow/particles.hpp"
#include "vpflow/phase_grid.hpp"
#include "vpflow/scenarios.hpp"
#include "vpflow/simulation.hpp"
