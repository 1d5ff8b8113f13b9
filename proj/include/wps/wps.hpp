#pragma once

#include "wps/coeffield.hpp"
#include "wps/core/error.hpp"
#include "wps/core/fourier_series.hpp"
#include "wps/core/grid_function.hpp"
#include "wps/core/numerics.hpp"
#include "wps/core/record.hpp"
#include "wps/experiments.hpp"
#include "wps/hamflow.hpp"
#include "wps/lpdecomp.hpp"
#include "wps/oracle.hpp"
#include "wps/parametrix.hpp"
#include "wps/presets.hpp"
#include "wps/wavepacket.hpp"
