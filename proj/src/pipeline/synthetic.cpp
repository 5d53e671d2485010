#include "dseg/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "dseg/labels.hpp"
#include "json.hpp"

namespace dseg {

namespace fs = std::filesystem;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

template <class F>
Mask raster(int size, F&& inside) {
    Mask m(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) m.at(y, x) = inside(x + 0.5, y + 0.5) ? 1 : 0;
    }
    return m;
}

Mask blob(int s, std::mt19937_64& rng) {
    struct Ellipse {
        double cx, cy, rx, ry, cs, sn;
    };
    std::vector<Ellipse> parts(static_cast<std::size_t>(uniform_int(rng, 3, 5)));
    for (auto& e : parts) {
        e.cx = s * uniform(rng, 0.3, 0.7);
        e.cy = s * uniform(rng, 0.3, 0.7);
        e.rx = s * uniform(rng, 0.1, 0.25);
        e.ry = s * uniform(rng, 0.1, 0.25);
        const double a = uniform(rng, 0, std::numbers::pi);
        e.cs = std::cos(a);
        e.sn = std::sin(a);
    }
    return raster(s, [&](double x, double y) {
        return std::any_of(parts.begin(), parts.end(), [&](const Ellipse& e) {
            const double u = ((x - e.cx) * e.cs + (y - e.cy) * e.sn) / e.rx;
            const double v = (-(x - e.cx) * e.sn + (y - e.cy) * e.cs) / e.ry;
            return u * u + v * v <= 1.0;
        });
    });
}

Mask ring(int s, std::mt19937_64& rng) {
    const double cx = s * uniform(rng, 0.42, 0.58);
    const double cy = s * uniform(rng, 0.42, 0.58);
    const double outer = s * uniform(rng, 0.28, 0.4);
    const double thick = std::max(2.0, s * uniform(rng, 0.03, 0.07));
    const bool second = uniform(rng, 0, 1) < 0.5;
    const double inner_outer = outer * uniform(rng, 0.45, 0.6);
    return raster(s, [&](double x, double y) {
        const double r = std::hypot(x - cx, y - cy);
        if (r <= outer && r >= outer - thick) return true;
        return second && r <= inner_outer && r >= inner_outer - thick;
    });
}

Mask star(int s, std::mt19937_64& rng) {
    const int spikes = uniform_int(rng, 5, 9);
    const double cx = s * uniform(rng, 0.42, 0.58);
    const double cy = s * uniform(rng, 0.42, 0.58);
    const double outer = s * uniform(rng, 0.3, 0.42);
    const double inner = outer * uniform(rng, 0.3, 0.55);
    const double phase = uniform(rng, 0, 2 * std::numbers::pi);
    std::vector<std::array<double, 2>> poly;
    for (int i = 0; i < 2 * spikes; ++i) {
        const double a = phase + i * std::numbers::pi / spikes;
        const double r = i % 2 == 0 ? outer : inner;
        poly.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
    }
    return raster(s, [&](double x, double y) {
        bool in = false;  // even-odd rule
        for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
            const auto& a = poly[i];
            const auto& b = poly[j];
            if ((a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0]) in = !in;
        }
        return in;
    });
}

Mask grid(int s, std::mt19937_64& rng, int line_width) {
    const int w = line_width > 0 ? line_width : uniform_int(rng, 1, std::max(1, s / 64));
    const int x0 = static_cast<int>(s * uniform(rng, 0.08, 0.2));
    const int y0 = static_cast<int>(s * uniform(rng, 0.08, 0.2));
    const int x1 = s - static_cast<int>(s * uniform(rng, 0.08, 0.2));
    const int y1 = s - static_cast<int>(s * uniform(rng, 0.08, 0.2));
    const int cells = uniform_int(rng, 3, 7);
    Mask m(s, s);
    auto hline = [&](int y) {
        for (int t = 0; t < w; ++t)
            for (int x = x0; x < x1 + w; ++x)
                if (y + t < s && x < s) m.at(y + t, x) = 1;
    };
    auto vline = [&](int x) {
        for (int t = 0; t < w; ++t)
            for (int y = y0; y < y1 + w; ++y)
                if (x + t < s && y < s) m.at(y, x + t) = 1;
    };
    for (int i = 0; i <= cells; ++i) {
        hline(y0 + (y1 - y0) * i / cells);
        vline(x0 + (x1 - x0) * i / cells);
    }
    return m;
}

Mask plate(int s, std::mt19937_64& rng) {
    const bool round = uniform(rng, 0, 1) < 0.5;
    const double cx = s * 0.5;
    const double cy = s * 0.5;
    const double hw = s * uniform(rng, 0.28, 0.4);
    const double hh = s * uniform(rng, 0.28, 0.4);
    struct Hole {
        double x, y, r;
    };
    std::vector<Hole> holes(static_cast<std::size_t>(uniform_int(rng, 3, 8)));
    for (auto& h : holes) {
        h.r = s * uniform(rng, 0.03, 0.08);
        h.x = cx + uniform(rng, -0.6, 0.6) * hw;
        h.y = cy + uniform(rng, -0.6, 0.6) * hh;
    }
    return raster(s, [&](double x, double y) {
        const double u = (x - cx) / hw;
        const double v = (y - cy) / hh;
        const bool body = round ? u * u + v * v <= 1.0 : std::fabs(u) <= 1.0 && std::fabs(v) <= 1.0;
        if (!body) return false;
        return std::none_of(holes.begin(), holes.end(),
                            [&](const Hole& h) { return std::hypot(x - h.x, y - h.y) <= h.r; });
    });
}

struct Texture {
    std::array<double, 3> base;
    std::array<double, 3> stripe;
    double fx, fy, phase, noise;
};

Texture random_texture(std::mt19937_64& rng) {
    Texture t;
    for (int c = 0; c < 3; ++c) {
        t.base[static_cast<std::size_t>(c)] = uniform(rng, 0.1, 0.9);
        t.stripe[static_cast<std::size_t>(c)] = uniform(rng, -0.12, 0.12);
    }
    const double f = uniform(rng, 0.02, 0.2);
    const double a = uniform(rng, 0, std::numbers::pi);
    t.fx = f * std::cos(a);
    t.fy = f * std::sin(a);
    t.phase = uniform(rng, 0, 2 * std::numbers::pi);
    t.noise = uniform(rng, 0.0, 0.05);
    return t;
}

double luminance(const std::array<double, 3>& c) { return (c[0] + c[1] + c[2]) / 3.0; }

}  // namespace

std::string to_string(ShapeKind k) {
    switch (k) {
        case ShapeKind::blob: return "blob";
        case ShapeKind::ring: return "ring";
        case ShapeKind::star: return "star";
        case ShapeKind::grid: return "grid";
        case ShapeKind::plate: return "plate";
    }
    return "?";
}

Mask render_shape(ShapeKind kind, int size, std::mt19937_64& rng, int line_width) {
    if (size < 8) throw std::invalid_argument("synthetic images must be at least 8 px wide");
    switch (kind) {
        case ShapeKind::blob: return blob(size, rng);
        case ShapeKind::ring: return ring(size, rng);
        case ShapeKind::star: return star(size, rng);
        case ShapeKind::grid: return grid(size, rng, line_width);
        case ShapeKind::plate: return plate(size, rng);
    }
    throw std::invalid_argument("unknown shape kind");
}

RgbImage render_image(const Mask& mask, std::mt19937_64& rng) {
    Texture bg = random_texture(rng);
    Texture fg = random_texture(rng);
    // Keep the two regions apart in brightness so the mask is recoverable.
    const double diff = luminance(fg.base) - luminance(bg.base);
    if (std::fabs(diff) < 0.3) {
        const double shift = (diff >= 0 ? 0.3 : -0.3) - diff;
        for (auto& c : fg.base) c = std::clamp(c + shift, 0.0, 1.0);
        if (std::fabs(luminance(fg.base) - luminance(bg.base)) < 0.3) {
            for (auto& c : fg.base) c = std::clamp(c - 2 * shift, 0.0, 1.0);
        }
    }
    std::normal_distribution<double> noise(0.0, 1.0);
    RgbImage img(mask.height, mask.width);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const Texture& t = mask.at(y, x) ? fg : bg;
            const double wave = std::sin(t.fx * x + t.fy * y + t.phase);
            const double n = t.noise * noise(rng);
            for (int c = 0; c < 3; ++c) {
                const auto k = static_cast<std::size_t>(c);
                img.at(c, y, x) = static_cast<float>(std::clamp(t.base[k] + t.stripe[k] * wave + n, 0.0, 1.0));
            }
        }
    }
    return img;
}

Dataset make_synthetic(const SyntheticOptions& opts, const std::string& out_dir) {
    if (opts.count < 0) throw std::invalid_argument("synthetic count must be >= 0");
    if (opts.size < 8) throw std::invalid_argument("synthetic size must be >= 8");
    const int band = opts.band_width >= 0 ? opts.band_width : default_band_width(opts.size);
    const fs::path root(out_dir);
    for (const char* d : {"im", "gt", "trunk", "struct"}) fs::create_directories(root / d);

    Dataset ds;
    ds.root = root.string();
    nlohmann::json samples = nlohmann::json::array();
    for (int i = 0; i < opts.count; ++i) {
        std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                          static_cast<std::uint32_t>(i), 0x5e9u};
        std::mt19937_64 rng(seq);
        const auto kind = static_cast<ShapeKind>(i % kShapeKinds);
        const Mask mask = render_shape(kind, opts.size, rng);
        const RgbImage img = render_image(mask, rng);
        const LabelTriplet labels = decouple(mask, band);

        char id[32];
        std::snprintf(id, sizeof id, "syn_%04d", i);
        SampleRecord r;
        r.id = id;
        r.image_path = (root / "im" / (r.id + ".png")).string();
        r.mask_path = (root / "gt" / (r.id + ".png")).string();
        r.trunk_path = (root / "trunk" / (r.id + ".png")).string();
        r.structure_path = (root / "struct" / (r.id + ".png")).string();
        write_rgb_png(r.image_path, img);
        write_mask_png(r.mask_path, mask);
        write_mask_png(r.trunk_path, labels.trunk);
        write_mask_png(r.structure_path, labels.structure);
        samples.push_back({{"id", r.id},
                           {"kind", to_string(kind)},
                           {"image", "im/" + r.id + ".png"},
                           {"mask", "gt/" + r.id + ".png"},
                           {"trunk", "trunk/" + r.id + ".png"},
                           {"structure", "struct/" + r.id + ".png"}});
        ds.samples.push_back(std::move(r));
    }
    nlohmann::json manifest;
    manifest["format"] = "dseg-dataset";
    manifest["version"] = 1;
    manifest["count"] = opts.count;
    manifest["size"] = opts.size;
    manifest["seed"] = opts.seed;
    manifest["band_width"] = band;
    manifest["samples"] = std::move(samples);
    std::ofstream out(root / "manifest.json");
    if (!out) throw std::runtime_error("cannot write " + (root / "manifest.json").string());
    out << manifest.dump(2) << '\n';
    return ds;
}

}  // namespace dseg
