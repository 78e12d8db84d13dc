#pragma once

#include "dimer/bifurcation.hpp"
#include "dimer/core.hpp"
#include "dimer/dynamics.hpp"
#include "dimer/hysteresis.hpp"
#include "dimer/io.hpp"
