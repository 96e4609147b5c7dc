#pragma once

#include "coulomb/geometry.hpp"
#include "coulomb/quadrature.hpp"
#include "coulomb/measure.hpp"
#include "coulomb/fields.hpp"
#include "coulomb/test_function.hpp"
#include "coulomb/energy.hpp"
#include "coulomb/diagnostics.hpp"
#include "coulomb/sampler.hpp"
#include "coulomb/electric.hpp"
#include "coulomb/transport.hpp"
#include "coulomb/clt.hpp"
#include "coulomb/io.hpp"
#include "coulomb/config.hpp"
