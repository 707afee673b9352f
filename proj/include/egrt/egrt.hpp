#pragma once

#include "egrt/core_regulation.hpp"
#include "egrt/criticality.hpp"
#include "egrt/diffusion.hpp"
#include "egrt/pid.hpp"
#include "egrt/procedural.hpp"
#include "egrt/regulator_demos.hpp"
#include "egrt/rng.hpp"
#include "egrt/variety.hpp"
