#pragma once

#include "necklace/error.hpp"
#include "necklace/lattice.hpp"
#include "necklace/field.hpp"
#include "necklace/operators.hpp"
#include "necklace/spectral.hpp"
#include "necklace/fft.hpp"
#include "necklace/bloch.hpp"
#include "necklace/kdv.hpp"
#include "necklace/boussinesq.hpp"
#include "necklace/validation.hpp"
#include "necklace/io.hpp"
#include "necklace/svg.hpp"
