#pragma once

#include "mvn/error.hpp"
#include "mvn/hyperparams.hpp"
#include "mvn/optimizer.hpp"
#include "mvn/optimizer_kind.hpp"
#include "mvn/oracles.hpp"
#include "mvn/rng.hpp"
#include "mvn/separation.hpp"
#include "mvn/spike.hpp"
#include "mvn/stats.hpp"
#include "mvn/vgap.hpp"
