#pragma once

// Union encoder: shared (or twin) ResNet backbone over the two input sizes,
// per-destination channel reduction, the full-resolution shallow path and the
// regrouping of the two pyramids into trunk-bound and structure-bound sets.

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dseg/model_config.hpp"
#include "dseg/nn.hpp"

namespace dseg {

/// A named activation map. `name` is its pyramid role ("HR3", "LR1", "HR0").
template <class T>
struct Feature {
    std::string name;
    Var<T> map;

    [[nodiscard]] int size() const { return map.shape().h; }
};

/// Scale divisor of `f` relative to a reference side length.
template <class T>
int scale_divisor(const Feature<T>& f, int reference) {
    return reference / f.size();
}

/// Raw stage widths of the five backbone taps (stem, layer1..layer4).
std::array<int, 5> backbone_channels(BackboneKind kind);

template <class T>
class Backbone {
public:
    Backbone(nn::ParamStore<T>& store, const std::string& prefix, BackboneKind kind);

    /// Stage outputs at strides 2, 4, 8, 16, 32. Throws unless the side is divisible by 32.
    [[nodiscard]] std::array<Var<T>, 5> forward(const nn::Context& ctx, const Var<T>& image) const;

    [[nodiscard]] BackboneKind kind() const { return kind_; }

private:
    struct Block {
        bool bottleneck = false;
        nn::ConvBn<T> a, b, c;
        std::optional<nn::ConvBn<T>> down;
    };

    Var<T> run_block(const nn::Context& ctx, const Block& blk, const Var<T>& x) const;

    BackboneKind kind_;
    nn::ConvBn<T> stem_;
    std::array<std::vector<Block>, 4> stages_;
};

/// 1x1 conv -> 3x3 conv -> BN, mapping a backbone tap to a decoder stream width.
template <class T>
class ChannelReduction {
public:
    ChannelReduction(nn::ParamStore<T>& store, const std::string& name, int in, int out);
    [[nodiscard]] Var<T> operator()(const nn::Context& ctx, const Var<T>& x) const;

private:
    nn::Conv2d<T> squeeze_;
    nn::Conv2d<T> mix_;
    nn::BatchNorm2d<T> bn_;
};

/// Applies one reduction per feature, each with its own parameters.
template <class T>
std::vector<Feature<T>> reduce_channels(const nn::Context& ctx,
                                        const std::vector<const ChannelReduction<T>*>& blocks,
                                        const std::vector<Feature<T>>& features);

/// Full-resolution shallow feature taken straight from the large input: one
/// 3x3 conv-BN-ReLU block, never initialized from a checkpoint.
template <class T>
class Hr0Path {
public:
    Hr0Path(nn::ParamStore<T>& store, const std::string& name, int out);
    [[nodiscard]] Var<T> operator()(const nn::Context& ctx, const Var<T>& image) const;

private:
    nn::ConvBn<T> block_;
};

/// Destination of every routed feature, each list ordered smallest spatial first.
template <class T>
struct FeatureGroups {
    std::vector<Feature<T>> trunk;
    std::vector<Feature<T>> structure;
};

/// Splits the two pyramids between the decoders. With DCM the trunk group is
/// {HR3, HR4, HR5, LR4, LR5} and the structure group {LR1, LR2, LR3, HR1, HR2}
/// (+HR0); without it the trunk takes LR1..LR5 and the structure HR1..HR5 (+HR0).
/// `hr[i]` must be hr_side / 2^(i+1) and `lr[i]` lr_side / 2^(i+1).
template <class T>
FeatureGroups<T> dcm_regroup(const std::array<Feature<T>, 5>& hr, const std::array<Feature<T>, 5>& lr,
                             const std::optional<Feature<T>>& hr0, bool use_dcm, int hr_side,
                             int lr_side);

template <class T>
struct EncoderOutput {
    std::vector<Feature<T>> trunk_inputs;      // trunk_channels wide, smallest first
    std::vector<Feature<T>> structure_inputs;  // structure_channels wide, smallest first
};

/// Route names (e.g. "HR3") of each group for a configuration, smallest first.
struct RoutePlan {
    std::vector<std::string> trunk;
    std::vector<std::string> structure;
};
RoutePlan route_plan(const ModelConfig& cfg);

template <class T>
class Encoder {
public:
    Encoder(nn::ParamStore<T>& store, const ModelConfig& cfg);

    /// `image_lr` is ignored in single-input mode.
    [[nodiscard]] EncoderOutput<T> forward(const nn::Context& ctx, const Var<T>& image_hr,
                                           const Var<T>& image_lr) const;

    /// The five raw backbone taps of the large input.
    [[nodiscard]] std::array<Var<T>, 5> backbone_forward(const nn::Context& ctx,
                                                         const Var<T>& image) const {
        return hr_backbone_->forward(ctx, image);
    }

    [[nodiscard]] const Backbone<T>& hr_backbone() const { return *hr_backbone_; }
    [[nodiscard]] const Backbone<T>& lr_backbone() const { return *lr_backbone_; }
    [[nodiscard]] const Hr0Path<T>* hr0() const { return hr0_ ? &*hr0_ : nullptr; }

private:
    ModelConfig cfg_;
    std::shared_ptr<Backbone<T>> hr_backbone_;
    std::shared_ptr<Backbone<T>> lr_backbone_;
    std::optional<Hr0Path<T>> hr0_;
    std::vector<ChannelReduction<T>> trunk_reduce_;
    std::vector<ChannelReduction<T>> structure_reduce_;
};

}  // namespace dseg
