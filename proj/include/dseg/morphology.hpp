#pragma once

// Exact Euclidean distance transform, disk morphology, connected components,
// boundary tracing and polygon simplification on binary masks.

#include <cstdint>
#include <limits>
#include <vector>

#include "dseg/image.hpp"

namespace dseg::morph {

inline constexpr std::int64_t kNoSite = std::numeric_limits<std::int64_t>::max();

/// Squared Euclidean distance from every pixel to the nearest pixel with
/// `sites` = 1 (0 on sites, kNoSite when there are none). When `nearest` is
/// given it receives the flat index of that site; among equidistant sites
/// the one with the smallest column, then the smallest row, is chosen
/// (-1 when there are none).
std::vector<std::int64_t> squared_edt(const Mask& sites, std::vector<std::int32_t>* nearest = nullptr);

/// Pixels within Euclidean distance r of the mask.
Mask dilate(const Mask& m, int r);
/// Pixels whose nearest zero pixel lies farther than r. The area outside
/// the image is not treated as background.
Mask erode(const Mask& m, int r);

Mask logical_and(const Mask& a, const Mask& b);
Mask logical_or(const Mask& a, const Mask& b);
Mask logical_not(const Mask& a);
/// a AND NOT b.
Mask difference(const Mask& a, const Mask& b);

/// 8-connected component labels (0 = background, components numbered 1.. in
/// raster order of their first pixel).
struct Components {
    std::vector<std::int32_t> labels;
    std::vector<std::int64_t> areas;  // areas[k-1] for label k
    std::vector<std::int32_t> first;  // raster-first pixel of each component
    [[nodiscard]] int count() const { return static_cast<int>(areas.size()); }
};
Components label_components(const Mask& m);

struct Point {
    int x = 0;
    int y = 0;
    friend bool operator==(const Point&, const Point&) = default;
};

/// Outer boundary pixels of the component holding `start` (which must be its
/// raster-first pixel), traced clockwise by Moore-neighbour tracing. Holes
/// are not traced.
std::vector<Point> trace_outer_boundary(const std::vector<std::int32_t>& labels, int height, int width,
                                        std::int32_t start);

/// Douglas-Peucker simplification of a closed contour. The contour is split
/// at its first point and the point farthest from it; returns the kept
/// vertices in contour order.
std::vector<Point> simplify_closed(const std::vector<Point>& contour, double epsilon);

}  // namespace dseg::morph
