#include "dseg/encoder.hpp"

#include <algorithm>

namespace dseg {

using nn::ParamGroup;

std::array<int, 5> backbone_channels(BackboneKind kind) {
    switch (kind) {
        case BackboneKind::resnet18:
        case BackboneKind::resnet34: return {64, 64, 128, 256, 512};
        case BackboneKind::resnet50: return {64, 256, 512, 1024, 2048};
        case BackboneKind::tiny: return {16, 16, 32, 64, 128};
    }
    return {};
}

template <class T>
Backbone<T>::Backbone(nn::ParamStore<T>& store, const std::string& prefix, BackboneKind kind)
    : kind_(kind) {
    const auto g = ParamGroup::backbone;
    const std::string p = prefix + ".";
    std::array<int, 4> depth{};
    std::array<int, 4> planes{};
    bool bottleneck = false;
    switch (kind) {
        case BackboneKind::resnet18: depth = {2, 2, 2, 2}; planes = {64, 128, 256, 512}; break;
        case BackboneKind::resnet34: depth = {3, 4, 6, 3}; planes = {64, 128, 256, 512}; break;
        case BackboneKind::resnet50:
            depth = {3, 4, 6, 3};
            planes = {64, 128, 256, 512};
            bottleneck = true;
            break;
        case BackboneKind::tiny: depth = {1, 1, 1, 1}; planes = {16, 32, 64, 128}; break;
    }
    const int stem_out = kind == BackboneKind::tiny ? 16 : 64;
    const int stem_k = kind == BackboneKind::tiny ? 3 : 7;
    stem_ = nn::ConvBn<T>(store, p + "conv1", p + "bn1", 3, stem_out, stem_k, true, g, 2, true);

    const int expansion = bottleneck ? 4 : 1;
    int in = stem_out;
    for (int s = 0; s < 4; ++s) {
        for (int b = 0; b < depth[s]; ++b) {
            const std::string bp = p + "layer" + std::to_string(s + 1) + "." + std::to_string(b) + ".";
            const int stride = (b == 0 && s > 0) ? 2 : 1;
            const int out = planes[s] * expansion;
            Block blk;
            blk.bottleneck = bottleneck;
            if (bottleneck) {
                blk.a = nn::ConvBn<T>(store, bp + "conv1", bp + "bn1", in, planes[s], 1, true, g, 1, true);
                blk.b = nn::ConvBn<T>(store, bp + "conv2", bp + "bn2", planes[s], planes[s], 3, true, g,
                                      stride, true);
                blk.c = nn::ConvBn<T>(store, bp + "conv3", bp + "bn3", planes[s], out, 1, false, g, 1, true);
            } else {
                blk.a = nn::ConvBn<T>(store, bp + "conv1", bp + "bn1", in, planes[s], 3, true, g, stride,
                                      true);
                blk.b = nn::ConvBn<T>(store, bp + "conv2", bp + "bn2", planes[s], out, 3, false, g, 1, true);
            }
            if (stride != 1 || in != out) {
                blk.down = nn::ConvBn<T>(store, bp + "downsample.0", bp + "downsample.1", in, out, 1,
                                         false, g, stride, true);
            }
            stages_[s].push_back(std::move(blk));
            in = out;
        }
    }
}

template <class T>
Var<T> Backbone<T>::run_block(const nn::Context& ctx, const Block& blk, const Var<T>& x) const {
    Var<T> y = blk.b(ctx, blk.a(ctx, x));
    if (blk.bottleneck) y = blk.c(ctx, y);
    const Var<T> shortcut = blk.down ? (*blk.down)(ctx, x) : x;
    return ops::relu(ops::add(y, shortcut));
}

template <class T>
std::array<Var<T>, 5> Backbone<T>::forward(const nn::Context& ctx, const Var<T>& image) const {
    const Shape s = image.shape();
    DSEG_CHECK(s.c == 3, "backbone expects 3-channel input, got " + s.str());
    DSEG_CHECK(s.h % 32 == 0 && s.w % 32 == 0,
               "input side must be divisible by 32, got " + std::to_string(s.h) + "x" +
                   std::to_string(s.w));
    std::array<Var<T>, 5> taps;
    taps[0] = stem_(ctx, image);
    Var<T> x = ops::max_pool3x3s2(taps[0]);
    for (int st = 0; st < 4; ++st) {
        for (const auto& blk : stages_[st]) x = run_block(ctx, blk, x);
        taps[st + 1] = x;
    }
    return taps;
}

template <class T>
ChannelReduction<T>::ChannelReduction(nn::ParamStore<T>& store, const std::string& name, int in,
                                      int out)
    : squeeze_(store, name + ".conv1x1", in, out, 1, 1, 0, false, ParamGroup::head),
      mix_(store, name + ".conv3x3", out, out, 3, 1, 1, false, ParamGroup::head),
      bn_(store, name + ".bn", out, ParamGroup::head) {}

template <class T>
Var<T> ChannelReduction<T>::operator()(const nn::Context& ctx, const Var<T>& x) const {
    return bn_(ctx, mix_(squeeze_(x)));
}

template <class T>
std::vector<Feature<T>> reduce_channels(const nn::Context& ctx,
                                        const std::vector<const ChannelReduction<T>*>& blocks,
                                        const std::vector<Feature<T>>& features) {
    DSEG_CHECK(blocks.size() == features.size(), "one reduction block per feature required");
    std::vector<Feature<T>> out;
    out.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        out.push_back({features[i].name, (*blocks[i])(ctx, features[i].map)});
    }
    return out;
}

template <class T>
Hr0Path<T>::Hr0Path(nn::ParamStore<T>& store, const std::string& name, int out)
    : block_(store, name, 3, out, 3, true) {}

template <class T>
Var<T> Hr0Path<T>::operator()(const nn::Context& ctx, const Var<T>& image) const {
    return block_(ctx, image);
}

namespace {

struct GroupNames {
    std::vector<std::string> trunk;
    std::vector<std::string> structure;
};

GroupNames group_names(bool use_dcm) {
    if (use_dcm) return {{"HR3", "HR4", "HR5", "LR4", "LR5"}, {"HR1", "HR2", "LR1", "LR2", "LR3"}};
    return {{"LR1", "LR2", "LR3", "LR4", "LR5"}, {"HR1", "HR2", "HR3", "HR4", "HR5"}};
}

int level_of(const std::string& name) { return name[2] - '0'; }

template <class Item, class SizeFn>
void sort_by_size(std::vector<Item>& items, SizeFn size) {
    std::stable_sort(items.begin(), items.end(),
                     [&](const Item& a, const Item& b) { return size(a) < size(b); });
}

}  // namespace

template <class T>
FeatureGroups<T> dcm_regroup(const std::array<Feature<T>, 5>& hr, const std::array<Feature<T>, 5>& lr,
                             const std::optional<Feature<T>>& hr0, bool use_dcm, int hr_side,
                             int lr_side) {
    for (int i = 0; i < 5; ++i) {
        DSEG_CHECK(hr[i].size() == hr_side >> (i + 1),
                   "scale mismatch: HR" + std::to_string(i + 1) + " is " + std::to_string(hr[i].size()) +
                       ", expected " + std::to_string(hr_side >> (i + 1)));
        DSEG_CHECK(lr[i].size() == lr_side >> (i + 1),
                   "scale mismatch: LR" + std::to_string(i + 1) + " is " + std::to_string(lr[i].size()) +
                       ", expected " + std::to_string(lr_side >> (i + 1)));
    }
    if (hr0) DSEG_CHECK(hr0->size() == hr_side, "scale mismatch: HR0 must be at full input size");

    auto pick = [&](const std::string& name) -> Feature<T> {
        const auto& src = name[0] == 'H' ? hr : lr;
        Feature<T> f = src[level_of(name) - 1];
        f.name = name;
        return f;
    };
    const GroupNames names = group_names(use_dcm);
    FeatureGroups<T> g;
    for (const auto& n : names.trunk) g.trunk.push_back(pick(n));
    for (const auto& n : names.structure) g.structure.push_back(pick(n));
    if (hr0) g.structure.push_back({"HR0", hr0->map});
    sort_by_size(g.trunk, [](const Feature<T>& f) { return f.size(); });
    sort_by_size(g.structure, [](const Feature<T>& f) { return f.size(); });
    return g;
}

RoutePlan route_plan(const ModelConfig& cfg) {
    const int hr = cfg.hr_size;
    const int lr = cfg.input_mode == InputMode::dual ? cfg.lr_size : cfg.hr_size / 4;
    auto size = [&](const std::string& n) {
        if (n == "HR0") return hr;
        return (n[0] == 'H' ? hr : lr) >> level_of(n);
    };
    const GroupNames names = group_names(cfg.use_dcm);
    RoutePlan plan{names.trunk, names.structure};
    if (cfg.use_hr0) plan.structure.push_back("HR0");
    sort_by_size(plan.trunk, size);
    sort_by_size(plan.structure, size);
    return plan;
}

template <class T>
Encoder<T>::Encoder(nn::ParamStore<T>& store, const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    if (cfg.shared_backbone) {
        hr_backbone_ = std::make_shared<Backbone<T>>(store, "backbone", cfg.backbone);
        lr_backbone_ = hr_backbone_;
    } else {
        hr_backbone_ = std::make_shared<Backbone<T>>(store, "backbone_hr", cfg.backbone);
        lr_backbone_ = std::make_shared<Backbone<T>>(store, "backbone_lr", cfg.backbone);
    }
    if (cfg.use_hr0) hr0_.emplace(store, "hr0", cfg.structure_channels);

    // In single-input mode LR1..LR3 are HR3..HR5 and LR4/LR5 are pooled from HR5.
    const auto widths = backbone_channels(cfg.backbone);
    auto width = [&](const std::string& n) {
        const int level = level_of(n);
        if (n[0] == 'L' && cfg.input_mode == InputMode::single) return widths[std::min(level + 2, 5) - 1];
        return widths[level - 1];
    };
    const RoutePlan plan = route_plan(cfg);
    for (const auto& n : plan.trunk) {
        trunk_reduce_.emplace_back(store, "reduce.trunk." + n, width(n), cfg.trunk_channels);
    }
    for (const auto& n : plan.structure) {
        if (n == "HR0") continue;
        structure_reduce_.emplace_back(store, "reduce.structure." + n, width(n), cfg.structure_channels);
    }
}

template <class T>
EncoderOutput<T> Encoder<T>::forward(const nn::Context& ctx, const Var<T>& image_hr,
                                     const Var<T>& image_lr) const {
    DSEG_CHECK(image_hr.shape().h == cfg_.hr_size && image_hr.shape().w == cfg_.hr_size,
               "large input must be " + std::to_string(cfg_.hr_size) + " square, got " +
                   image_hr.shape().str());
    const auto hr_taps = hr_backbone_->forward(ctx, image_hr);
    std::array<Feature<T>, 5> hr, lr;
    for (int i = 0; i < 5; ++i) hr[i] = {"HR" + std::to_string(i + 1), hr_taps[i]};

    int lr_side = cfg_.lr_size;
    if (cfg_.input_mode == InputMode::dual) {
        DSEG_CHECK(image_lr.defined() && image_lr.shape().h == cfg_.lr_size &&
                       image_lr.shape().w == cfg_.lr_size,
                   "small input must be " + std::to_string(cfg_.lr_size) + " square");
        const auto lr_taps = lr_backbone_->forward(ctx, image_lr);
        for (int i = 0; i < 5; ++i) lr[i] = {"LR" + std::to_string(i + 1), lr_taps[i]};
    } else {
        lr_side = cfg_.hr_size / 4;
        lr[0] = {"LR1", hr_taps[2]};
        lr[1] = {"LR2", hr_taps[3]};
        lr[2] = {"LR3", hr_taps[4]};
        lr[3] = {"LR4", ops::avg_pool2x2(hr_taps[4])};
        lr[4] = {"LR5", ops::avg_pool2x2(lr[3].map)};
    }

    std::optional<Feature<T>> hr0;
    if (hr0_) hr0 = Feature<T>{"HR0", (*hr0_)(ctx, image_hr)};

    const FeatureGroups<T> groups = dcm_regroup(hr, lr, hr0, cfg_.use_dcm, cfg_.hr_size, lr_side);

    EncoderOutput<T> out;
    std::vector<const ChannelReduction<T>*> blocks;
    for (const auto& b : trunk_reduce_) blocks.push_back(&b);
    out.trunk_inputs = reduce_channels(ctx, blocks, groups.trunk);

    std::size_t next = 0;
    for (const auto& f : groups.structure) {
        if (f.name == "HR0") {
            out.structure_inputs.push_back(f);
        } else {
            out.structure_inputs.push_back({f.name, structure_reduce_.at(next++)(ctx, f.map)});
        }
    }
    return out;
}

template class Backbone<float>;
template class Backbone<double>;
template class ChannelReduction<float>;
template class ChannelReduction<double>;
template class Hr0Path<float>;
template class Hr0Path<double>;
template class Encoder<float>;
template class Encoder<double>;
template std::vector<Feature<float>> reduce_channels(const nn::Context&,
                                                     const std::vector<const ChannelReduction<float>*>&,
                                                     const std::vector<Feature<float>>&);
template std::vector<Feature<double>> reduce_channels(const nn::Context&,
                                                      const std::vector<const ChannelReduction<double>*>&,
                                                      const std::vector<Feature<double>>&);
template FeatureGroups<float> dcm_regroup(const std::array<Feature<float>, 5>&,
                                          const std::array<Feature<float>, 5>&,
                                          const std::optional<Feature<float>>&, bool, int, int);
template FeatureGroups<double> dcm_regroup(const std::array<Feature<double>, 5>&,
                                           const std::array<Feature<double>, 5>&,
                                           const std::optional<Feature<double>>&, bool, int, int);

}  // namespace dseg
