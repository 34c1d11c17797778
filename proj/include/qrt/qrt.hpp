#pragma once

// Umbrella header for the response-theory toolbox.

#include "qrt/analytic.hpp"
#include "qrt/config.hpp"
#include "qrt/correlators.hpp"
#include "qrt/dynamics.hpp"
#include "qrt/io.hpp"
#include "qrt/linalg.hpp"
#include "qrt/model.hpp"
#include "qrt/thermal.hpp"
#include "qrt/workstats.hpp"
