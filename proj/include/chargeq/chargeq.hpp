#pragma once

// Umbrella header for the chargeq library.

#include "chargeq/curve.hpp"
#include "chargeq/data_io.hpp"
#include "chargeq/equilibrium.hpp"
#include "chargeq/model.hpp"
#include "chargeq/oracle.hpp"
