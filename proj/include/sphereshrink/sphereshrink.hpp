#pragma once

#include "sphereshrink/numerics.hpp"
#include "sphereshrink/radial_models.hpp"
#include "sphereshrink/rv_priors.hpp"
#include "sphereshrink/radial_convolution.hpp"
#include "sphereshrink/shrinkage.hpp"
#include "sphereshrink/minimax_audit.hpp"
#include "sphereshrink/risk_sim.hpp"
#include "sphereshrink/special_integrals.hpp"
