#pragma once

// Training-time augmentation and construction of the two network inputs.

#include <random>
#include <utility>

#include "dseg/image.hpp"
#include "dseg/labels.hpp"
#include "dseg/tensor.hpp"
#include "dseg/train_config.hpp"

namespace dseg {

/// One concrete augmentation: optional horizontal flip, then the crop
/// window [y0, y0+side_h) x [x0, x0+side_w), resized back to the input size.
struct AugmentDraw {
    bool flip = false;
    int x0 = 0;
    int y0 = 0;
    int crop_w = 0;
    int crop_h = 0;
};

/// Samples a draw for an h x w input: flip with probability flip_prob and a
/// crop whose side fraction is U[crop_min, 1], placed uniformly.
AugmentDraw draw_augment(std::mt19937_64& rng, int h, int w, double flip_prob, double crop_min);

RgbImage apply_augment(const RgbImage& img, const AugmentDraw& d);
Mask apply_augment(const Mask& m, const AugmentDraw& d);

/// Applies one random draw to the image and the mask; trunk and structure
/// are recomputed from the augmented mask at labels.band_width.
std::pair<RgbImage, LabelTriplet> augment(const RgbImage& img, const LabelTriplet& labels,
                                          std::mt19937_64& rng, double flip_prob = 0.5,
                                          double crop_min = 0.75);

struct DualInput {
    RgbImage hr;
    RgbImage lr;
};

/// lr = bilinear resize of hr to lr_size; both then normalised.
DualInput make_dual_input(const RgbImage& hr, int lr_size, const Normalization& norm);

/// Stacks equally sized RGB images into an [N,3,H,W] tensor.
Tensor<float> stack_images(const std::vector<const RgbImage*>& images);
/// Stacks equally sized masks into an [N,1,H,W] tensor of 0/1.
Tensor<float> stack_masks(const std::vector<const Mask*>& masks);

}  // namespace dseg
