// Umbrella header.
#pragma once

#include "handshadow/autodiff.hpp"
#include "handshadow/bvh.hpp"
#include "handshadow/camera.hpp"
#include "handshadow/collision.hpp"
#include "handshadow/gradcheck.hpp"
#include "handshadow/image.hpp"
#include "handshadow/interpolation.hpp"
#include "handshadow/losses.hpp"
#include "handshadow/math.hpp"
#include "handshadow/mesh.hpp"
#include "handshadow/optim.hpp"
#include "handshadow/rasterize.hpp"
#include "handshadow/rig.hpp"
#include "handshadow/rig_io.hpp"
#include "handshadow/runconfig.hpp"
#include "handshadow/targets.hpp"
