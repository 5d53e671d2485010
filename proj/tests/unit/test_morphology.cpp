#include <random>

#include "../support/oracles.hpp"
#include "doctest.h"
#include "dseg/morphology.hpp"

using namespace dseg;

TEST_SUITE("morphology") {

TEST_CASE("squared EDT and nearest site match brute force") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 60; ++trial) {
        const Mask m = oracle::random_mask(rng, 3 + trial % 11, 2 + (trial * 7) % 13, trial);
        std::vector<std::int32_t> nearest;
        const auto d = morph::squared_edt(m, &nearest);
        std::vector<std::int64_t> d2;
        std::vector<int> idx;
        oracle::edt(m, d2, idx);
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (d2[i] == INT64_MAX) {
                CHECK(d[i] == morph::kNoSite);
                CHECK(nearest[i] == -1);
            } else {
                CHECK(d[i] == d2[i]);
                CHECK(nearest[i] == idx[i]);
            }
        }
    }
}

TEST_CASE("disk dilation and erosion match brute force") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 40; ++trial) {
        const Mask m = oracle::random_mask(rng, 12, 15, trial);
        for (int r : {0, 1, 2, 3, 5}) {
            CHECK(morph::dilate(m, r) == oracle::dilate(m, r));
            CHECK(morph::erode(m, r) == oracle::erode(m, r));
        }
    }
}

TEST_CASE("erosion does not treat the outside as background") {
    Mask full(6, 6, 1);
    CHECK(morph::erode(full, 3) == full);
    CHECK_THROWS_AS(morph::erode(full, -1), std::invalid_argument);
}

TEST_CASE("8-connected labelling matches union-find") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 40; ++trial) {
        const Mask m = oracle::random_mask(rng, 14, 11, trial);
        const auto c = morph::label_components(m);
        const auto o = oracle::components(m);
        REQUIRE(c.count() == static_cast<int>(o.area.size()));
        for (std::size_t i = 0; i < m.size(); ++i) CHECK(c.labels[i] == o.label[i]);
        for (int k = 0; k < c.count(); ++k) {
            CHECK(c.areas[static_cast<std::size_t>(k)] == o.area[static_cast<std::size_t>(k)]);
            CHECK(c.first[static_cast<std::size_t>(k)] == o.first[static_cast<std::size_t>(k)]);
        }
    }
}

TEST_CASE("diagonal neighbours are connected") {
    Mask m(3, 3);
    m.at(0, 0) = m.at(1, 1) = m.at(2, 2) = 1;
    CHECK(morph::label_components(m).count() == 1);
}

TEST_CASE("outer boundary tracing matches an independent Moore tracer") {
    std::mt19937_64 rng(24);
    for (int trial = 0; trial < 60; ++trial) {
        const Mask m = oracle::random_mask(rng, 13, 16, trial);
        const auto c = morph::label_components(m);
        const auto o = oracle::components(m);
        for (int k = 0; k < c.count(); ++k) {
            const auto a = morph::trace_outer_boundary(c.labels, m.height, m.width, c.first[static_cast<std::size_t>(k)]);
            const auto b = oracle::moore_trace(o, m.height, m.width, o.first[static_cast<std::size_t>(k)]);
            REQUIRE(a.size() == b.size());
            for (std::size_t i = 0; i < a.size(); ++i) {
                CHECK(a[i].x == b[i].x);
                CHECK(a[i].y == b[i].y);
            }
            CHECK(morph::simplify_closed(a, 2.0).size() == oracle::dp_vertices(b, 2.0));
        }
    }
}

TEST_CASE("square boundary traces clockwise and simplifies to its corners") {
    Mask m(14, 14);
    for (int y = 2; y < 12; ++y)
        for (int x = 2; x < 12; ++x) m.at(y, x) = 1;
    const auto c = morph::label_components(m);
    const auto contour = morph::trace_outer_boundary(c.labels, 14, 14, c.first[0]);
    CHECK(contour.size() == 36);
    CHECK(contour[0] == morph::Point{2, 2});
    CHECK(contour[1] == morph::Point{3, 2});  // east first: clockwise on screen
    const auto poly = morph::simplify_closed(contour, 2.0);
    REQUIRE(poly.size() == 4);
    CHECK(poly[0] == morph::Point{2, 2});
    CHECK(poly[1] == morph::Point{11, 2});
    CHECK(poly[2] == morph::Point{11, 11});
    CHECK(poly[3] == morph::Point{2, 11});
}

TEST_CASE("holes are not traced") {
    Mask ring(9, 9);
    for (int y = 1; y < 8; ++y)
        for (int x = 1; x < 8; ++x) ring.at(y, x) = (y == 1 || y == 7 || x == 1 || x == 7);
    Mask solid(9, 9);
    for (int y = 1; y < 8; ++y)
        for (int x = 1; x < 8; ++x) solid.at(y, x) = 1;
    const auto a = morph::label_components(ring);
    const auto b = morph::label_components(solid);
    CHECK(morph::trace_outer_boundary(a.labels, 9, 9, a.first[0]) ==
          morph::trace_outer_boundary(b.labels, 9, 9, b.first[0]));
}

TEST_CASE("single pixels and lines") {
    Mask dot(3, 3);
    dot.at(1, 1) = 1;
    auto c = morph::label_components(dot);
    CHECK(morph::trace_outer_boundary(c.labels, 3, 3, c.first[0]).size() == 1);
    Mask line(1, 5, 1);
    c = morph::label_components(line);
    const auto t = morph::trace_outer_boundary(c.labels, 1, 5, c.first[0]);
    CHECK(t.size() == 8);  // out and back
    CHECK(morph::simplify_closed(t, 2.0).size() == 2);
}

}  // TEST_SUITE
