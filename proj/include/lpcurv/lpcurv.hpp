#pragma once

#include "lpcurv/errors.hpp"
#include "lpcurv/spherical_harmonics.hpp"
#include "lpcurv/sphere_grid.hpp"
#include "lpcurv/convex_geom.hpp"
#include "lpcurv/bodies.hpp"
#include "lpcurv/gmres.hpp"
#include "lpcurv/pde_core.hpp"
#include "lpcurv/validators.hpp"
#include "lpcurv/homotopy.hpp"
#include "lpcurv/io.hpp"
