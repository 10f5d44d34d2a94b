#pragma once

#include "qtag/adversary.hpp"
#include "qtag/config.hpp"
#include "qtag/engine.hpp"
#include "qtag/experiment.hpp"
#include "qtag/keys.hpp"
#include "qtag/mac.hpp"
#include "qtag/protocol.hpp"
#include "qtag/qke.hpp"
#include "qtag/report.hpp"
#include "qtag/rng.hpp"
#include "qtag/scenario.hpp"
#include "qtag/sim.hpp"
#include "qtag/spacetime.hpp"
#include "qtag/time.hpp"
#include "qtag/trace.hpp"
