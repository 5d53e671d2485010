#pragma once

// Image containers and PNG/JPEG file IO.

#include <cstdint>
#include <string>
#include <vector>

namespace dseg {

/// Single-channel real-valued image, row-major. Masks and predictions.
struct Plane {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    Plane() = default;
    Plane(int h, int w, float fill = 0.0f)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

    [[nodiscard]] std::size_t size() const { return data.size(); }
    float& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    [[nodiscard]] float at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
    friend bool operator==(const Plane&, const Plane&) = default;
};

/// Binary image with values in {0, 1}.
struct Mask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    Mask() = default;
    Mask(int h, int w, std::uint8_t fill = 0)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

    [[nodiscard]] std::size_t size() const { return data.size(); }
    std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    [[nodiscard]] std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
    [[nodiscard]] std::size_t count() const;
    friend bool operator==(const Mask&, const Mask&) = default;
};

/// Three-channel image in [0,1], planar (all R, then G, then B).
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    RgbImage() = default;
    RgbImage(int h, int w, float fill = 0.0f)
        : height(h), width(w), data(static_cast<std::size_t>(3) * h * w, fill) {}

    float& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    [[nodiscard]] float at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Converts a {0,1}-valued plane; throws if any value is not exactly 0 or 1.
Mask to_mask(const Plane& p);
/// pixel > threshold -> 1.
Mask threshold(const Plane& p, float t);
Plane to_plane(const Mask& m);

/// Bilinear resize with half-pixel centers.
Plane resize(const Plane& p, int h, int w);
RgbImage resize(const RgbImage& img, int h, int w);

// Reading converts 8-bit data to [0,1] (v / 255). Colour files read as gray
// use the mean of the channels; gray files read as RGB are replicated.
// PNG and JPEG are recognised by their signature.
Plane read_gray(const std::string& path);
RgbImage read_rgb(const std::string& path);

/// Writes 8-bit PNG, rounding clamp(v, 0, 1) * 255.
void write_gray_png(const std::string& path, const Plane& p);
void write_mask_png(const std::string& path, const Mask& m);
void write_rgb_png(const std::string& path, const RgbImage& img);

}  // namespace dseg
