#include "dseg/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dseg/dataset.hpp"

namespace dseg {

AugmentDraw draw_augment(std::mt19937_64& rng, int h, int w, double flip_prob, double crop_min) {
    AugmentDraw d;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    d.flip = unit(rng) < flip_prob;
    const double frac = crop_min + (1.0 - crop_min) * unit(rng);
    d.crop_w = std::clamp(static_cast<int>(std::lround(frac * w)), 1, w);
    d.crop_h = std::clamp(static_cast<int>(std::lround(frac * h)), 1, h);
    d.x0 = std::uniform_int_distribution<int>(0, w - d.crop_w)(rng);
    d.y0 = std::uniform_int_distribution<int>(0, h - d.crop_h)(rng);
    return d;
}

namespace {

void check_window(const AugmentDraw& d, int h, int w) {
    if (d.crop_w < 1 || d.crop_h < 1 || d.x0 < 0 || d.y0 < 0 || d.x0 + d.crop_w > w || d.y0 + d.crop_h > h) {
        throw std::invalid_argument("crop window outside a " + std::to_string(h) + "x" + std::to_string(w) +
                                    " image");
    }
}

}  // namespace

RgbImage apply_augment(const RgbImage& img, const AugmentDraw& d) {
    check_window(d, img.height, img.width);
    RgbImage crop(d.crop_h, d.crop_w);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < d.crop_h; ++y) {
            for (int x = 0; x < d.crop_w; ++x) {
                const int sx = d.x0 + x;
                crop.at(c, y, x) = img.at(c, d.y0 + y, d.flip ? img.width - 1 - sx : sx);
            }
        }
    }
    return crop.height == img.height && crop.width == img.width ? crop : resize(crop, img.height, img.width);
}

Mask apply_augment(const Mask& m, const AugmentDraw& d) {
    check_window(d, m.height, m.width);
    Mask crop(d.crop_h, d.crop_w);
    for (int y = 0; y < d.crop_h; ++y) {
        for (int x = 0; x < d.crop_w; ++x) {
            const int sx = d.x0 + x;
            crop.at(y, x) = m.at(d.y0 + y, d.flip ? m.width - 1 - sx : sx);
        }
    }
    return resize_mask(crop, m.height, m.width);
}

std::pair<RgbImage, LabelTriplet> augment(const RgbImage& img, const LabelTriplet& labels,
                                          std::mt19937_64& rng, double flip_prob, double crop_min) {
    if (img.height != labels.mask.height || img.width != labels.mask.width) {
        throw std::invalid_argument("augment: image and mask sizes differ");
    }
    const AugmentDraw d = draw_augment(rng, img.height, img.width, flip_prob, crop_min);
    return {apply_augment(img, d), decouple(apply_augment(labels.mask, d), labels.band_width)};
}

DualInput make_dual_input(const RgbImage& hr, int lr_size, const Normalization& norm) {
    if (lr_size <= 0) throw std::invalid_argument("make_dual_input: lr_size must be positive");
    DualInput out;
    out.hr = hr;
    out.lr = hr.height == lr_size && hr.width == lr_size ? hr : resize(hr, lr_size, lr_size);
    for (RgbImage* im : {&out.hr, &out.lr}) {
        const std::size_t plane = static_cast<std::size_t>(im->height) * im->width;
        for (std::size_t c = 0; c < 3; ++c) {
            const float m = norm.mean[c];
            const float inv = 1.0f / norm.std[c];
            float* p = im->data.data() + c * plane;
            for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - m) * inv;
        }
    }
    return out;
}

Tensor<float> stack_images(const std::vector<const RgbImage*>& images) {
    if (images.empty()) throw std::invalid_argument("stack_images: empty batch");
    const int h = images[0]->height;
    const int w = images[0]->width;
    Tensor<float> t(static_cast<int>(images.size()), 3, h, w);
    for (std::size_t n = 0; n < images.size(); ++n) {
        if (images[n]->height != h || images[n]->width != w) {
            throw std::invalid_argument("stack_images: batch images differ in size");
        }
        std::copy(images[n]->data.begin(), images[n]->data.end(), t.plane(static_cast<int>(n), 0));
    }
    return t;
}

Tensor<float> stack_masks(const std::vector<const Mask*>& masks) {
    if (masks.empty()) throw std::invalid_argument("stack_masks: empty batch");
    const int h = masks[0]->height;
    const int w = masks[0]->width;
    Tensor<float> t(static_cast<int>(masks.size()), 1, h, w);
    for (std::size_t n = 0; n < masks.size(); ++n) {
        if (masks[n]->height != h || masks[n]->width != w) {
            throw std::invalid_argument("stack_masks: batch masks differ in size");
        }
        float* dst = t.plane(static_cast<int>(n), 0);
        for (std::size_t i = 0; i < masks[n]->size(); ++i) dst[i] = masks[n]->data[i] ? 1.0f : 0.0f;
    }
    return t;
}

}  // namespace dseg
