#pragma once

#include "wiggly/constraints.hpp"
#include "wiggly/errors.hpp"
#include "wiggly/modal.hpp"
#include "wiggly/model.hpp"
#include "wiggly/oracle.hpp"
#include "wiggly/quadrature.hpp"
#include "wiggly/spacetime.hpp"
#include "wiggly/trajectory.hpp"
#include "wiggly/types.hpp"
#include "wiggly/warp.hpp"
#include "wiggly/warp_map.hpp"
#include "wiggly/wiggly_spline.hpp"
