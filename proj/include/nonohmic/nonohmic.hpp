#pragma once

#include "nonohmic/numerics.hpp"
#include "nonohmic/spectral_theory.hpp"
#include "nonohmic/hamiltonian.hpp"
#include "nonohmic/propagator.hpp"
#include "nonohmic/ldos.hpp"
#include "nonohmic/volterra.hpp"
#include "nonohmic/observables.hpp"
#include "nonohmic/simulation.hpp"
#include "nonohmic/io.hpp"
#include "nonohmic/harness.hpp"
#include "nonohmic/acceptance.hpp"
