#ifndef CLBM_CLBM_HPP_
#define CLBM_CLBM_HPP_

#include "clbm/errors.hpp"
#include "clbm/lattice.hpp"
#include "clbm/kron.hpp"
#include "clbm/collision.hpp"
#include "clbm/carleman.hpp"
#include "clbm/spectral.hpp"
#include "clbm/truncation.hpp"
#include "clbm/turbulence.hpp"
#include "clbm/complexity.hpp"
#include "clbm/io.hpp"

#endif  // CLBM_CLBM_HPP_
