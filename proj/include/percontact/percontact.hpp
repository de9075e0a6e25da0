#pragma once
// Umbrella header.

#include "percontact/config.hpp"
#include "percontact/data.hpp"
#include "percontact/diagnostics.hpp"
#include "percontact/engine.hpp"
#include "percontact/io.hpp"
#include "percontact/measurement.hpp"
#include "percontact/model.hpp"
#include "percontact/posterior.hpp"
#include "percontact/priors.hpp"
#include "percontact/samplers.hpp"
#include "percontact/simulator.hpp"
