#pragma once

// Umbrella header for the mixture learning library.

#include "mixlearn/errors.hpp"
#include "mixlearn/linalg/dense_lp.hpp"
#include "mixlearn/linalg/sym_eigen.hpp"
#include "mixlearn/core_model.hpp"
#include "mixlearn/sampling.hpp"
#include "mixlearn/isotropize.hpp"
#include "mixlearn/spectral.hpp"
#include "mixlearn/kspike1d.hpp"
#include "mixlearn/learner.hpp"
#include "mixlearn/lower_bounds.hpp"
#include "mixlearn/serialization.hpp"
#include "mixlearn/cli_harness.hpp"
