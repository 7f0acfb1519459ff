#pragma once

#include "rootopt/baselines.hpp"
#include "rootopt/dataset.hpp"
#include "rootopt/dgp.hpp"
#include "rootopt/error.hpp"
#include "rootopt/estimators.hpp"
#include "rootopt/math.hpp"
#include "rootopt/nuisance.hpp"
#include "rootopt/parallel.hpp"
#include "rootopt/rng.hpp"
#include "rootopt/root.hpp"
#include "rootopt/theory.hpp"
#include "rootopt/tree.hpp"
#include "rootopt/version.hpp"
