#pragma once

#include "wsnr/config.hpp"
#include "wsnr/engine.hpp"
#include "wsnr/metrics.hpp"
#include "wsnr/protocol.hpp"
#include "wsnr/recovery.hpp"
#include "wsnr/rng.hpp"
#include "wsnr/sweep.hpp"
#include "wsnr/topology.hpp"
#include "wsnr/trace.hpp"
