#pragma once

#include "rsdd/types.hpp"
#include "rsdd/problem.hpp"
#include "rsdd/qp.hpp"
#include "rsdd/lift.hpp"
#include "rsdd/core.hpp"
#include "rsdd/oracle.hpp"
#include "rsdd/validation.hpp"
#include "rsdd/io.hpp"
#include "rsdd/graph.hpp"
#include "rsdd/simulator.hpp"
#include "rsdd/invariants.hpp"
#include "rsdd/artifact.hpp"
#include "rsdd/metrics.hpp"
