#pragma once

#include "snlab/causality.hpp"
#include "snlab/diagnostics.hpp"
#include "snlab/error.hpp"
#include "snlab/experiments.hpp"
#include "snlab/fft.hpp"
#include "snlab/grid.hpp"
#include "snlab/io.hpp"
#include "snlab/kernel.hpp"
#include "snlab/parallel.hpp"
#include "snlab/propagator.hpp"
#include "snlab/units.hpp"
