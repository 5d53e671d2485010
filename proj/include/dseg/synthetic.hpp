#pragma once

// Procedural stand-in for a dichotomous-segmentation dataset: binary masks
// with trunk-heavy and structure-heavy shapes over textured backgrounds.

#include <cstdint>
#include <random>
#include <string>

#include "dseg/dataset.hpp"
#include "dseg/image.hpp"

namespace dseg {

enum class ShapeKind { blob, ring, star, grid, plate };
inline constexpr int kShapeKinds = 5;

std::string to_string(ShapeKind k);

/// Mask of the given kind; grid lines are `line_width` pixels wide (<= 0: random).
Mask render_shape(ShapeKind kind, int size, std::mt19937_64& rng, int line_width = 0);

/// Composites textured foreground and background through the mask.
RgbImage render_image(const Mask& mask, std::mt19937_64& rng);

struct SyntheticOptions {
    int count = 0;
    int size = 256;
    std::uint64_t seed = 0;
    int band_width = -1;  // < 0: default for `size`
};

/// Writes im/, gt/, trunk/, struct/ (PNG) and manifest.json under out_dir.
/// Sample i has kind i mod 5 (blob, ring, star, grid, plate). Identical
/// options give byte-identical files.
Dataset make_synthetic(const SyntheticOptions& opts, const std::string& out_dir);

}  // namespace dseg
