#pragma once

#include "sketchforge/field.hpp"

namespace sketchforge {

// Procedural reference scene: a textured sphere resting on a flat slab, with
// a soft density falloff at the surfaces. Used as the Dirac target fixture.
VoxelGrid make_toy_scene(int resolution = 48);

}  // namespace sketchforge
