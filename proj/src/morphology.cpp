#include "dseg/morphology.hpp"

#include <cmath>
#include <algorithm>
#include <stdexcept>

namespace dseg::morph {

namespace {

/// Exact rational with positive denominator; `inf` of -1/+1 encodes -/+ infinity.
struct Frac {
    std::int64_t num = 0;
    std::int64_t den = 1;
    int inf = 0;
};

bool less(const Frac& a, const Frac& b) {
    if (a.inf != 0 || b.inf != 0) return a.inf < b.inf;
    return a.num * b.den < b.num * a.den;
}

bool less_equal(const Frac& a, const Frac& b) { return !less(b, a); }

void check_same_size(const Mask& a, const Mask& b) {
    if (a.height != b.height || a.width != b.width) {
        throw std::invalid_argument("mask sizes differ: " + std::to_string(a.height) + "x" +
                                    std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                                    std::to_string(b.width));
    }
}

}  // namespace

std::vector<std::int64_t> squared_edt(const Mask& sites, std::vector<std::int32_t>* nearest) {
    const int h = sites.height;
    const int w = sites.width;
    const std::size_t n = sites.size();

    // Column pass: nearest site row within the same column (ties -> upper row).
    std::vector<std::int64_t> col_d(n, kNoSite);
    std::vector<std::int32_t> col_row(n, -1);
    for (int x = 0; x < w; ++x) {
        int last = -1;
        for (int y = 0; y < h; ++y) {
            if (sites.at(y, x)) last = y;
            col_row[static_cast<std::size_t>(y) * w + x] = last;
        }
        int next = -1;
        for (int y = h - 1; y >= 0; --y) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (sites.at(y, x)) next = y;
            const int up = col_row[i];
            int best = up;
            if (next >= 0 && (up < 0 || next - y < y - up)) best = next;
            col_row[i] = best;
            if (best >= 0) {
                const std::int64_t d = y - best;
                col_d[i] = d * d;
            }
        }
    }

    // Row pass: lower envelope of parabolas (x - q)^2 + f(q); ties -> smaller q.
    std::vector<std::int64_t> dist(n, kNoSite);
    if (nearest) nearest->assign(n, -1);
    std::vector<int> v(static_cast<std::size_t>(w));
    std::vector<Frac> z(static_cast<std::size_t>(w) + 1);
    for (int y = 0; y < h; ++y) {
        const std::int64_t* f = col_d.data() + static_cast<std::size_t>(y) * w;
        int k = -1;
        for (int q = 0; q < w; ++q) {
            if (f[q] == kNoSite) continue;
            Frac s;
            while (k >= 0) {
                const int p = v[static_cast<std::size_t>(k)];
                s.num = (f[q] + static_cast<std::int64_t>(q) * q) - (f[p] + static_cast<std::int64_t>(p) * p);
                s.den = 2 * static_cast<std::int64_t>(q - p);
                s.inf = 0;
                if (less_equal(s, z[static_cast<std::size_t>(k)])) {
                    --k;
                } else {
                    break;
                }
            }
            ++k;
            v[static_cast<std::size_t>(k)] = q;
            z[static_cast<std::size_t>(k)] = k == 0 ? Frac{0, 1, -1} : s;
            z[static_cast<std::size_t>(k) + 1] = Frac{0, 1, 1};
        }
        if (k < 0) continue;
        int j = 0;
        for (int x = 0; x < w; ++x) {
            const Frac fx{x, 1, 0};
            while (less(z[static_cast<std::size_t>(j) + 1], fx)) ++j;
            const int q = v[static_cast<std::size_t>(j)];
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const std::int64_t dx = x - q;
            dist[i] = dx * dx + f[q];
            if (nearest) {
                (*nearest)[i] = col_row[static_cast<std::size_t>(y) * w + q] * w + q;
            }
        }
    }
    return dist;
}

Mask dilate(const Mask& m, int r) {
    if (r < 0) throw std::invalid_argument("radius must be >= 0");
    const auto d = squared_edt(m);
    const std::int64_t r2 = static_cast<std::int64_t>(r) * r;
    Mask out(m.height, m.width);
    for (std::size_t i = 0; i < d.size(); ++i) out.data[i] = d[i] <= r2 ? 1 : 0;
    return out;
}

Mask erode(const Mask& m, int r) {
    if (r < 0) throw std::invalid_argument("radius must be >= 0");
    const auto d = squared_edt(logical_not(m));
    const std::int64_t r2 = static_cast<std::int64_t>(r) * r;
    Mask out(m.height, m.width);
    for (std::size_t i = 0; i < d.size(); ++i) out.data[i] = d[i] > r2 ? 1 : 0;
    return out;
}

Mask logical_and(const Mask& a, const Mask& b) {
    check_same_size(a, b);
    Mask out(a.height, a.width);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] & b.data[i];
    return out;
}

Mask logical_or(const Mask& a, const Mask& b) {
    check_same_size(a, b);
    Mask out(a.height, a.width);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] | b.data[i];
    return out;
}

Mask logical_not(const Mask& a) {
    Mask out(a.height, a.width);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] ? 0 : 1;
    return out;
}

Mask difference(const Mask& a, const Mask& b) {
    check_same_size(a, b);
    Mask out(a.height, a.width);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = (a.data[i] && !b.data[i]) ? 1 : 0;
    return out;
}

Components label_components(const Mask& m) {
    const int h = m.height;
    const int w = m.width;
    Components c;
    c.labels.assign(m.size(), 0);
    std::vector<std::int32_t> stack;
    for (int s = 0; s < static_cast<int>(m.size()); ++s) {
        if (!m.data[static_cast<std::size_t>(s)] || c.labels[static_cast<std::size_t>(s)]) continue;
        const std::int32_t label = c.count() + 1;
        c.first.push_back(s);
        std::int64_t area = 0;
        stack.assign(1, s);
        c.labels[static_cast<std::size_t>(s)] = label;
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            ++area;
            const int y = i / w;
            const int x = i % w;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int ny = y + dy;
                    const int nx = x + dx;
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                    const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
                    if (m.data[j] && !c.labels[j]) {
                        c.labels[j] = label;
                        stack.push_back(static_cast<int>(j));
                    }
                }
            }
        }
        c.areas.push_back(area);
    }
    return c;
}

std::vector<Point> trace_outer_boundary(const std::vector<std::int32_t>& labels, int height, int width,
                                        std::int32_t start) {
    static constexpr int kDx[8] = {-1, -1, 0, 1, 1, 1, 0, -1};  // W, NW, N, NE, E, SE, S, SW
    static constexpr int kDy[8] = {0, -1, -1, -1, 0, 1, 1, 1};
    const std::int32_t label = labels.at(static_cast<std::size_t>(start));
    if (label == 0) throw std::invalid_argument("boundary tracing must start on a foreground pixel");
    auto inside = [&](int x, int y) {
        return x >= 0 && y >= 0 && x < width && y < height &&
               labels[static_cast<std::size_t>(y) * width + x] == label;
    };
    auto direction = [](int dx, int dy) {
        for (int i = 0; i < 8; ++i) {
            if (kDx[i] == dx && kDy[i] == dy) return i;
        }
        return -1;
    };

    const Point s{start % width, start / width};
    std::vector<Point> contour{s};
    Point p = s;
    int back = 0;  // the west neighbour of the raster-first pixel is background
    Point first_next{-1, -1};
    const std::size_t limit = 4 * labels.size() + 8;
    while (contour.size() < limit) {
        int found = -1;
        for (int t = 1; t <= 8; ++t) {
            const int i = (back + t) % 8;
            if (inside(p.x + kDx[i], p.y + kDy[i])) {
                found = i;
                break;
            }
        }
        if (found < 0) break;  // isolated pixel
        const Point c{p.x + kDx[found], p.y + kDy[found]};
        if (p == s) {
            if (first_next.x < 0) {
                first_next = c;
            } else if (c == first_next) {
                break;
            }
        }
        const int prev = (found + 7) % 8;
        const Point b{p.x + kDx[prev], p.y + kDy[prev]};
        back = direction(b.x - c.x, b.y - c.y);
        p = c;
        if (p == s) continue;
        contour.push_back(p);
    }
    return contour;
}

namespace {

// Contours have integer coordinates, so distances are compared exactly:
// within one segment a->b every candidate is ranked by its squared distance
// times |b - a|^2, an integer.
using Wide = __int128;

Wide scaled_distance2(const Point& p, const Point& a, const Point& b, Wide len2) {
    const Wide vx = b.x - a.x, vy = b.y - a.y;
    const Wide wx = p.x - a.x, wy = p.y - a.y;
    const Wide dot = wx * vx + wy * vy;
    if (len2 == 0) return wx * wx + wy * wy;
    if (dot <= 0) return (wx * wx + wy * wy) * len2;
    if (dot >= len2) {
        const Wide ux = p.x - b.x, uy = p.y - b.y;
        return (ux * ux + uy * uy) * len2;
    }
    const Wide cross = wx * vy - wy * vx;
    return cross * cross;
}

bool beyond(Wide key, Wide len2, double eps) {
    const double e2 = eps * eps;
    const Wide scale = len2 == 0 ? 1 : len2;
    if (e2 == std::floor(e2) && e2 < 1e18) return key > static_cast<Wide>(e2) * scale;
    return static_cast<long double>(key) > static_cast<long double>(e2) * static_cast<long double>(scale);
}

void dp_open(const std::vector<Point>& pts, std::size_t lo, std::size_t hi, double eps, std::vector<char>& keep) {
    std::vector<std::pair<std::size_t, std::size_t>> todo{{lo, hi}};
    while (!todo.empty()) {
        const auto [a, b] = todo.back();
        todo.pop_back();
        if (b <= a + 1) continue;
        const Wide vx = pts[b].x - pts[a].x, vy = pts[b].y - pts[a].y;
        const Wide len2 = vx * vx + vy * vy;
        Wide best = -1;
        std::size_t idx = a;
        for (std::size_t i = a + 1; i < b; ++i) {
            const Wide d = scaled_distance2(pts[i], pts[a], pts[b], len2);
            if (d > best) {
                best = d;
                idx = i;
            }
        }
        if (beyond(best, len2, eps)) {
            keep[idx] = 1;
            todo.push_back({a, idx});
            todo.push_back({idx, b});
        }
    }
}

}  // namespace

std::vector<Point> simplify_closed(const std::vector<Point>& contour, double epsilon) {
    const std::size_t n = contour.size();
    if (n <= 2) return contour;
    std::size_t far = 0;
    std::int64_t best = -1;
    for (std::size_t i = 1; i < n; ++i) {
        const std::int64_t dx = contour[i].x - contour[0].x, dy = contour[i].y - contour[0].y;
        const std::int64_t d = dx * dx + dy * dy;
        if (d > best) {
            best = d;
            far = i;
        }
    }
    // Close the loop by appending the first point, then simplify both halves.
    std::vector<Point> ring(contour);
    ring.push_back(contour[0]);
    std::vector<char> keep(ring.size(), 0);
    keep[0] = 1;
    keep[far] = 1;
    dp_open(ring, 0, far, epsilon, keep);
    dp_open(ring, far, n, epsilon, keep);
    std::vector<Point> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (keep[i]) out.push_back(ring[i]);
    }
    return out;
}

}  // namespace dseg::morph
