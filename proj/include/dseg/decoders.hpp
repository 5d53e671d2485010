#pragma once

// Trunk decoder (dense cascade fusion), structure decoder (trunk-guided
// filtering + upsampling fusion) and the union decoder (TSA/MSA aggregation).

#include <optional>
#include <string>
#include <vector>

#include "dseg/encoder.hpp"

namespace dseg {

/// 1x1 conv + BN, no activation.
template <class T>
class C1 {
public:
    C1() = default;
    C1(nn::ParamStore<T>& store, const std::string& name, int in, int out)
        : block_(store, name, in, out, 1, false) {}
    Var<T> operator()(const nn::Context& ctx, const Var<T>& x) const { return block_(ctx, x); }
    [[nodiscard]] const nn::ConvBn<T>& block() const { return block_; }

private:
    nn::ConvBn<T> block_;
};

/// 3x3 conv + BN + ReLU.
template <class T>
class C3 {
public:
    C3() = default;
    C3(nn::ParamStore<T>& store, const std::string& name, int in, int out)
        : block_(store, name, in, out, 3, true) {}
    Var<T> operator()(const nn::Context& ctx, const Var<T>& x) const { return block_(ctx, x); }
    [[nodiscard]] const nn::ConvBn<T>& block() const { return block_; }

private:
    nn::ConvBn<T> block_;
};

/// Bilinear x2 upsampling.
template <class T>
Var<T> up2(const Var<T>& x);

/// up2(deeper) -> C1, plus C1(shallower). Requires shallower = 2 x deeper in size.
template <class T>
class CascadeFuse {
public:
    CascadeFuse(nn::ParamStore<T>& store, const std::string& name, int channels);
    [[nodiscard]] Var<T> operator()(const nn::Context& ctx, const Var<T>& deeper,
                                    const Var<T>& shallower) const;
    [[nodiscard]] const C1<T>& deep_proj() const { return deep_; }
    [[nodiscard]] const C1<T>& shallow_proj() const { return shallow_; }

private:
    C1<T> deep_;
    C1<T> shallow_;
};

/// Features passed from the trunk side to the structure and union decoders.
template <class T>
struct TrunkOutput {
    Var<T> logits;                // hr_size; undefined when the decoder is ablated
    std::vector<Feature<T>> taps;  // T21, T32, T43, T54
    [[nodiscard]] const Var<T>& T32() const { return taps.at(1).map; }
    [[nodiscard]] const Var<T>& T43() const { return taps.at(2).map; }
    [[nodiscard]] const Var<T>& T54() const { return taps.at(3).map; }
};

template <class T>
class TrunkDecoder {
public:
    TrunkDecoder(nn::ParamStore<T>& store, int channels);
    /// `inputs` smallest first, five maps of strictly doubling size.
    [[nodiscard]] TrunkOutput<T> forward(const nn::Context& ctx, const std::vector<Feature<T>>& inputs,
                                         int hr_size) const;

private:
    std::vector<CascadeFuse<T>> steps_;
    nn::Conv2d<T> head_;
};

/// S = lr_feature - C1(trunk_tap), projecting trunk width to structure width.
template <class T>
class StructureFilter {
public:
    StructureFilter(nn::ParamStore<T>& store, const std::string& name, int trunk_channels,
                    int structure_channels);
    [[nodiscard]] Var<T> operator()(const nn::Context& ctx, const Var<T>& lr_feature,
                                    const Var<T>& trunk_tap) const;
    [[nodiscard]] const C1<T>& projection() const { return proj_; }

private:
    C1<T> proj_;
};

template <class T>
struct StructureOutput {
    Var<T> logits;                      // hr_size; undefined when the decoder is ablated
    std::vector<Var<T>> filtered;       // S1, S2, S3
    std::vector<Feature<T>> fused_taps;  // after fusing HR2, HR1 (and HR0)
    Var<T> s65;                         // last fused feature
};

template <class T>
class StructureDecoder {
public:
    StructureDecoder(nn::ParamStore<T>& store, const ModelConfig& cfg);
    /// `inputs` smallest first: LR3, LR2, LR1, HR2, HR1 (, HR0).
    [[nodiscard]] StructureOutput<T> forward(const nn::Context& ctx, const std::vector<Feature<T>>& inputs,
                                             const TrunkOutput<T>& trunk) const;

private:
    bool use_filtering_;
    bool use_hr0_;
    int hr_size_;
    std::vector<StructureFilter<T>> filters_;
    std::vector<CascadeFuse<T>> steps_;
    nn::Conv2d<T> head_;
};

/// Replacement for an ablated decoder: repeatedly upsample the running
/// feature and add the next input, with no parameters.
template <class T>
std::vector<Feature<T>> plain_fusion(const std::vector<Feature<T>>& inputs);

template <class T>
TrunkOutput<T> plain_trunk(const std::vector<Feature<T>>& inputs);
template <class T>
StructureOutput<T> plain_structure(const std::vector<Feature<T>>& inputs);

/// Combines a guide feature (trunk or running mask feature) with a structure
/// feature. `tsa` follows F = C3(C3(C3(S * sig(C1(G))) + C1(S)) + C1(G)),
/// with separate C1 weights for the gate and the guide residual.
template <class T>
class Aggregator {
public:
    Aggregator(nn::ParamStore<T>& store, const std::string& name, Aggregation kind, int guide_channels,
               int structure_channels);
    [[nodiscard]] Var<T> operator()(const nn::Context& ctx, const Var<T>& guide,
                                    const Var<T>& structure) const;

    [[nodiscard]] Aggregation kind() const { return kind_; }
    [[nodiscard]] const C1<T>& gate() const { return gate_; }
    [[nodiscard]] const C1<T>& structure_residual() const { return s_res_; }
    [[nodiscard]] const C1<T>& guide_residual() const { return g_res_; }
    [[nodiscard]] const C3<T>& conv(int i) const { return conv_.at(static_cast<std::size_t>(i)); }
    /// Guide projection used by the add/concat variants (absent for add with equal widths).
    [[nodiscard]] const std::optional<C1<T>>& projection() const { return proj_; }

private:
    Aggregation kind_;
    C1<T> gate_, s_res_, g_res_;
    std::vector<C3<T>> conv_;
    std::optional<C1<T>> proj_;
};

template <class T>
struct UnionOutput {
    Var<T> logits;  // hr_size
    Var<T> feature;  // final fused feature before the head
};

/// Width of the hidden layer of the final two-conv head.
int union_head_channels(const ModelConfig& cfg);

template <class T>
class UnionDecoder {
public:
    UnionDecoder(nn::ParamStore<T>& store, const ModelConfig& cfg);
    [[nodiscard]] UnionOutput<T> forward(const nn::Context& ctx, const TrunkOutput<T>& trunk,
                                         const StructureOutput<T>& structure) const;

private:
    int hr_size_;
    std::vector<Aggregator<T>> tsa_;
    std::vector<Aggregator<T>> msa_;
    C3<T> head_mix_;
    nn::Conv2d<T> head_out_;
};

}  // namespace dseg
