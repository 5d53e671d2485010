#include "dseg/infer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "dseg/augment.hpp"

namespace dseg {

namespace fs = std::filesystem;

namespace {

Plane probability_map(const Var<float>& logits, int h, int w) {
    const Tensor<float>& t = logits.value();
    Plane p(t.h(), t.w());
    for (std::size_t i = 0; i < p.size(); ++i) p.data[i] = ops::sigmoid_value(t[i]);
    return p.height == h && p.width == w ? p : resize(p, h, w);
}

Plane heat_map(const Var<float>& feature, int h, int w) {
    const Tensor<float>& t = feature.value();
    Plane p(t.h(), t.w());
    for (int c = 0; c < t.c(); ++c) {
        const float* src = t.plane(0, c);
        for (std::size_t i = 0; i < p.size(); ++i) p.data[i] += std::fabs(src[i]);
    }
    const auto [lo, hi] = std::minmax_element(p.data.begin(), p.data.end());
    const float min = *lo;
    const float range = *hi - *lo;
    for (float& v : p.data) v = range > 0 ? (v - min) / range : 0.0f;
    return resize(p, h, w);
}

bool is_image(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

Prediction predict(const Model<float>& model, const RgbImage& image, const Normalization& norm,
                   bool with_features) {
    const ModelConfig& cfg = model.config();
    const RgbImage hr = image.height == cfg.hr_size && image.width == cfg.hr_size
                            ? image
                            : resize(image, cfg.hr_size, cfg.hr_size);
    const DualInput in = make_dual_input(hr, cfg.lr_size, norm);
    NoGradGuard no_grad;
    const nn::Context ctx;  // eval mode: running statistics
    const ModelOutput<float> out = model.forward(ctx, Var<float>(stack_images({&in.hr})),
                                                 Var<float>(stack_images({&in.lr})));
    const int h = image.height;
    const int w = image.width;
    Prediction p;
    p.mask = probability_map(out.mask_logits, h, w);
    if (out.trunk_logits.defined()) p.trunk = probability_map(out.trunk_logits, h, w);
    if (out.structure_logits.defined()) p.structure = probability_map(out.structure_logits, h, w);
    if (with_features) {
        if (out.t54.defined()) p.t54 = heat_map(out.t54, h, w);
        if (out.s65.defined()) p.s65 = heat_map(out.s65, h, w);
        p.fused = heat_map(out.fused, h, w);
    }
    return p;
}

LoadedModel load_model(const std::string& checkpoint_path) {
    const Checkpoint c = load_checkpoint(checkpoint_path);
    LoadedModel m;
    try {
        m.model = std::make_unique<Model<float>>(c.model, 0);
        restore(*m.model, c);
    } catch (const std::exception& e) {
        throw std::runtime_error("incompatible checkpoint " + checkpoint_path + ": " + e.what());
    }
    m.train = c.train;
    return m;
}

std::vector<std::string> infer(const std::string& input, const std::string& checkpoint_path,
                               const std::string& out_dir, const InferOptions& opts) {
    std::vector<fs::path> images;
    if (fs::is_directory(input)) {
        for (const auto& e : fs::directory_iterator(input)) {
            if (e.is_regular_file() && is_image(e.path())) images.push_back(e.path());
        }
        std::sort(images.begin(), images.end());
    } else if (fs::is_regular_file(input)) {
        images.emplace_back(input);
    } else {
        throw std::runtime_error("infer input not found: " + input);
    }
    const LoadedModel lm = load_model(checkpoint_path);
    fs::create_directories(out_dir);
    std::vector<std::string> written;
    auto emit = [&](const Plane& p, const std::string& name) {
        if (p.size() == 0) return;
        const std::string path = (fs::path(out_dir) / name).string();
        write_gray_png(path, p);
        written.push_back(path);
    };
    for (const auto& path : images) {
        RgbImage img;
        try {
            img = read_rgb(path.string());
        } catch (const std::exception& e) {
            throw std::runtime_error("cannot read image " + path.string() + ": " + e.what());
        }
        const Prediction p = predict(*lm.model, img, lm.train.norm, opts.dump_features);
        const std::string id = path.stem().string();
        emit(p.mask, id + ".png");
        if (opts.dump_aux) {
            emit(p.trunk, id + "_trunk.png");
            emit(p.structure, id + "_struct.png");
        }
        if (opts.dump_features) {
            emit(p.t54, id + "_t54.png");
            emit(p.s65, id + "_s65.png");
            emit(p.fused, id + "_fused.png");
        }
    }
    return written;
}

}  // namespace dseg
