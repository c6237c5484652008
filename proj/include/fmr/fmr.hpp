#pragma once

// Umbrella header: point-wise map recovery and refinement from low-rank
// functional maps.

#include "fmr/common.hpp"
#include "fmr/cpd.hpp"
#include "fmr/eval.hpp"
#include "fmr/fmap.hpp"
#include "fmr/geodesic.hpp"
#include "fmr/hungarian.hpp"
#include "fmr/kdtree.hpp"
#include "fmr/laplacian.hpp"
#include "fmr/mesh.hpp"
#include "fmr/recovery.hpp"
#include "fmr/refine.hpp"
#include "fmr/shapes.hpp"
#include "fmr/spectral.hpp"
