#pragma once

// Trunk / structure supervision derived from a binary mask.

#include "dseg/image.hpp"

namespace dseg {

struct LabelTriplet {
    Mask mask;
    Mask trunk;
    Mask structure;
    int band_width = 0;
};

/// structure = pixels within Euclidean distance `band_width` of the mask
/// boundary on either side (dilation minus erosion by a disk); trunk = the
/// erosion of the mask by the same disk.
LabelTriplet decouple(const Mask& mask, int band_width);
/// Same, for a plane that must hold only 0 and 1.
LabelTriplet decouple(const Plane& mask, int band_width);

/// Checks the four triplet invariants: trunk inside mask, every boundary
/// pixel in the structure band, trunk and structure disjoint beyond
/// `band_width` from the boundary, and mask = trunk | (structure & mask).
/// Throws on mismatched sizes.
bool verify_triplet(const LabelTriplet& t);

/// Band width for a given image side: 5 px at 1024, scaled linearly, at least 1.
int default_band_width(int side);

}  // namespace dseg
