#pragma once

#include "probtsf/adam.hpp"
#include "probtsf/calibration.hpp"
#include "probtsf/checkpoint.hpp"
#include "probtsf/core.hpp"
#include "probtsf/csv.hpp"
#include "probtsf/datagen.hpp"
#include "probtsf/forecast.hpp"
#include "probtsf/losses.hpp"
#include "probtsf/numeric.hpp"
#include "probtsf/report.hpp"
#include "probtsf/rng.hpp"
#include "probtsf/ssm.hpp"
#include "probtsf/training.hpp"
#include "probtsf/variance_head.hpp"
