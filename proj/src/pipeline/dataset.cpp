#include "dseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "dseg/morphology.hpp"
#include "json.hpp"

namespace dseg {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::string find_by_stem(const fs::path& dir, const std::string& stem) {
    if (!fs::is_directory(dir)) return {};
    for (const char* ext : {".png", ".jpg", ".jpeg", ".PNG", ".JPG", ".JPEG"}) {
        const fs::path p = dir / (stem + ext);
        if (fs::exists(p)) return p.string();
    }
    return {};
}

void require_file(const std::string& path, const std::string& what, const std::string& id) {
    if (!fs::is_regular_file(path)) {
        throw std::runtime_error("dataset sample '" + id + "': " + what + " file not found: " + path);
    }
}

Dataset load_manifest(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot read dataset manifest " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed dataset manifest " + file.string() + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("samples") || !j["samples"].is_array()) {
        throw std::runtime_error("dataset manifest " + file.string() + " has no 'samples' array");
    }
    Dataset ds;
    const fs::path root = file.parent_path();
    ds.root = root.string();
    auto rel = [&](const nlohmann::json& s, const char* key) -> std::string {
        if (!s.contains(key) || s[key].is_null()) return {};
        const fs::path p = s[key].get<std::string>();
        return p.is_absolute() ? p.string() : (root / p).string();
    };
    for (const auto& s : j["samples"]) {
        SampleRecord r;
        r.id = s.at("id").get<std::string>();
        r.image_path = rel(s, "image");
        r.mask_path = rel(s, "mask");
        r.trunk_path = rel(s, "trunk");
        r.structure_path = rel(s, "structure");
        require_file(r.image_path, "image", r.id);
        require_file(r.mask_path, "mask", r.id);
        if (!r.trunk_path.empty()) require_file(r.trunk_path, "trunk", r.id);
        if (!r.structure_path.empty()) require_file(r.structure_path, "structure", r.id);
        ds.samples.push_back(std::move(r));
    }
    return ds;
}

Dataset load_im_gt(const fs::path& root) {
    Dataset ds;
    ds.root = root.string();
    std::vector<fs::path> images;
    for (const auto& e : fs::directory_iterator(root / "im")) {
        if (e.is_regular_file() && is_image_file(e.path())) images.push_back(e.path());
    }
    std::sort(images.begin(), images.end());
    for (const auto& img : images) {
        SampleRecord r;
        r.id = img.stem().string();
        r.image_path = img.string();
        r.mask_path = find_by_stem(root / "gt", r.id);
        if (r.mask_path.empty()) {
            throw std::runtime_error("dataset sample '" + r.id + "': no mask under " + (root / "gt").string());
        }
        r.trunk_path = find_by_stem(root / "trunk", r.id);
        r.structure_path = find_by_stem(root / "struct", r.id);
        ds.samples.push_back(std::move(r));
    }
    return ds;
}

}  // namespace

std::string resolve_data_path(const std::string& path) {
    if (fs::exists(path)) return path;
    if (const char* root = std::getenv(kDataRootEnv); root && *root && !fs::path(path).is_absolute()) {
        const fs::path p = fs::path(root) / path;
        if (fs::exists(p)) return p.string();
    }
    return path;
}

Dataset load_dataset(const std::string& path_in) {
    const fs::path path = resolve_data_path(path_in);
    if (!fs::exists(path)) throw std::runtime_error("dataset path does not exist: " + path_in);
    if (fs::is_regular_file(path)) return load_manifest(path);
    if (fs::exists(path / "manifest.json")) return load_manifest(path / "manifest.json");
    if (fs::is_directory(path / "im") && fs::is_directory(path / "gt")) return load_im_gt(path);
    throw std::runtime_error("unrecognised dataset layout at " + path.string() +
                             " (expected manifest.json or im/ and gt/ directories)");
}

Mask resize_mask(const Mask& m, int h, int w) {
    if (m.height == h && m.width == w) return m;
    return threshold(resize(to_plane(m), h, w), 0.5f);
}

Sample load_sample(const SampleRecord& rec, int side) {
    Sample s;
    s.id = rec.id;
    s.image = read_rgb(rec.image_path);
    const Mask mask = threshold(read_gray(rec.mask_path), 0.5f);
    if (mask.height != s.image.height || mask.width != s.image.width) {
        throw std::runtime_error("dataset sample '" + rec.id + "': image is " + std::to_string(s.image.height) +
                                 "x" + std::to_string(s.image.width) + " but mask is " +
                                 std::to_string(mask.height) + "x" + std::to_string(mask.width));
    }
    if (s.image.height != side || s.image.width != side) s.image = resize(s.image, side, side);
    s.mask = resize_mask(mask, side, side);
    return s;
}

std::vector<std::string> verify_dataset_labels(const Dataset& ds) {
    std::vector<std::string> bad;
    for (const auto& r : ds.samples) {
        if (r.trunk_path.empty() || r.structure_path.empty()) continue;
        LabelTriplet t;
        t.mask = threshold(read_gray(r.mask_path), 0.5f);
        t.trunk = threshold(read_gray(r.trunk_path), 0.5f);
        t.structure = threshold(read_gray(r.structure_path), 0.5f);
        // The band width is not stored with the files. The trunk is the set of mask
        // pixels whose squared distance to the background exceeds d^2, which pins d
        // down to the smallest value covering every non-trunk mask pixel.
        const auto dist = morph::squared_edt(morph::logical_not(t.mask));
        std::int64_t need = 0;
        for (std::size_t i = 0; i < dist.size(); ++i) {
            if (t.mask.data[i] && !t.trunk.data[i] && dist[i] != morph::kNoSite) need = std::max(need, dist[i]);
        }
        int d = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(need))));
        while (static_cast<std::int64_t>(d) * d < need) ++d;
        const LabelTriplet ref = decouple(t.mask, d);
        const bool ok = ref.trunk == t.trunk && ref.structure == t.structure;
        if (!ok) bad.push_back(r.id);
    }
    return bad;
}

}  // namespace dseg
