#pragma once

#include "ddr/adam.hpp"
#include "ddr/data.hpp"
#include "ddr/dictionary.hpp"
#include "ddr/dynamics.hpp"
#include "ddr/error.hpp"
#include "ddr/gradients.hpp"
#include "ddr/model_io.hpp"
#include "ddr/objective.hpp"
#include "ddr/parallel.hpp"
#include "ddr/subspace.hpp"
#include "ddr/time_grid.hpp"
#include "ddr/training.hpp"
