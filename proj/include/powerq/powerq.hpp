#pragma once

// Everything at once, for callers that do not care about compile time.

#include "powerq/cli.hpp"
#include "powerq/config.hpp"
#include "powerq/error.hpp"
#include "powerq/metrics.hpp"
#include "powerq/model.hpp"
#include "powerq/optimizer.hpp"
#include "powerq/oracle.hpp"
#include "powerq/parallel.hpp"
#include "powerq/report.hpp"
#include "powerq/sim.hpp"
#include "powerq/solver.hpp"
#include "powerq/validation.hpp"
