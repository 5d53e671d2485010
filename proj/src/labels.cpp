#include "dseg/labels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dseg/morphology.hpp"

namespace dseg {

LabelTriplet decouple(const Mask& mask, int band_width) {
    if (band_width < 1) throw std::invalid_argument("band width must be >= 1");
    for (const auto v : mask.data) {
        if (v > 1) throw std::invalid_argument("mask is not binary");
    }
    LabelTriplet t;
    t.mask = mask;
    t.band_width = band_width;
    t.trunk = morph::erode(mask, band_width);
    t.structure = morph::difference(morph::dilate(mask, band_width), t.trunk);
    return t;
}

LabelTriplet decouple(const Plane& mask, int band_width) { return decouple(to_mask(mask), band_width); }

namespace {

bool same_size(const Mask& a, const Mask& b) { return a.height == b.height && a.width == b.width; }

/// Pixels whose value differs from a 4-neighbour.
Mask boundary_pixels(const Mask& m) {
    Mask b(m.height, m.width);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            const auto v = m.at(y, x);
            const bool edge = (x > 0 && m.at(y, x - 1) != v) || (x + 1 < m.width && m.at(y, x + 1) != v) ||
                              (y > 0 && m.at(y - 1, x) != v) || (y + 1 < m.height && m.at(y + 1, x) != v);
            b.at(y, x) = edge ? 1 : 0;
        }
    }
    return b;
}

}  // namespace

bool verify_triplet(const LabelTriplet& t) {
    if (!same_size(t.mask, t.trunk) || !same_size(t.mask, t.structure)) {
        throw std::invalid_argument("triplet maps differ in size");
    }
    const Mask boundary = boundary_pixels(t.mask);
    const auto dist = morph::squared_edt(boundary);
    const std::int64_t d2 = static_cast<std::int64_t>(t.band_width) * t.band_width;
    for (std::size_t i = 0; i < t.mask.size(); ++i) {
        const bool m = t.mask.data[i];
        const bool tr = t.trunk.data[i];
        const bool st = t.structure.data[i];
        if (tr && !m) return false;
        if (boundary.data[i] && !st) return false;
        if (dist[i] > d2 && tr && st) return false;
        if (m != (tr || (st && m))) return false;
    }
    return true;
}

int default_band_width(int side) {
    return std::max(1, static_cast<int>(std::lround(5.0 * side / 1024.0)));
}

}  // namespace dseg
