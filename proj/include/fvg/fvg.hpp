#pragma once

// Umbrella header for the fast visual gyroscope library.

#include "fvg/grid.hpp"
#include "fvg/legendre.hpp"
#include "fvg/sh_transform.hpp"
#include "fvg/moments.hpp"
#include "fvg/mask.hpp"
#include "fvg/rotation.hpp"
#include "fvg/synth.hpp"
#include "fvg/lbto.hpp"
#include "fvg/image_io.hpp"
#include "fvg/cache_io.hpp"
#include "fvg/dataset.hpp"
#include "fvg/model_io.hpp"
#include "fvg/pipeline.hpp"
