#pragma once

#include "bsdiag/diagnostics.hpp"
#include "bsdiag/distributions.hpp"
#include "bsdiag/errors.hpp"
#include "bsdiag/fitter.hpp"
#include "bsdiag/likelihood.hpp"
#include "bsdiag/model.hpp"
#include "bsdiag/numeric.hpp"
#include "bsdiag/version.hpp"
