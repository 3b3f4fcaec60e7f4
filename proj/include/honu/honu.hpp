#pragma once

#include "honu/types.hpp"
#include "honu/format.hpp"
#include "honu/polyops.hpp"
#include "honu/rates.hpp"
#include "honu/stability.hpp"
#include "honu/static_unit.hpp"
#include "honu/recurrent_unit.hpp"
#include "honu/adaptive_lr.hpp"
#include "honu/datagen.hpp"
#include "honu/io.hpp"
#include "honu/training.hpp"
#include "honu/experiment.hpp"
