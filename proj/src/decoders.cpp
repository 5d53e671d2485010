#include "dseg/decoders.hpp"

#include <algorithm>

namespace dseg {

using nn::ParamGroup;

namespace {

template <class T>
int side(const Var<T>& x) {
    return x.shape().h;
}

template <class T>
void require_same_size(const Var<T>& a, const Var<T>& b, const char* what) {
    DSEG_CHECK(a.shape().h == b.shape().h && a.shape().w == b.shape().w,
               std::string(what) + ": spatial mismatch " + a.shape().str() + " vs " + b.shape().str());
}

template <class T>
Var<T> to_side(const Var<T>& x, int s) {
    return side(x) == s ? x : ops::resize_bilinear(x, s, s);
}

template <class T>
void require_doubling(const std::vector<Feature<T>>& inputs, const char* what) {
    for (std::size_t i = 1; i < inputs.size(); ++i) {
        DSEG_CHECK(inputs[i].size() == 2 * inputs[i - 1].size(),
                   std::string(what) + ": input " + inputs[i].name + " (" +
                       std::to_string(inputs[i].size()) + ") is not twice " + inputs[i - 1].name + " (" +
                       std::to_string(inputs[i - 1].size()) + ")");
    }
}

}  // namespace

template <class T>
Var<T> up2(const Var<T>& x) {
    return ops::resize_bilinear(x, 2 * x.shape().h, 2 * x.shape().w);
}

template <class T>
CascadeFuse<T>::CascadeFuse(nn::ParamStore<T>& store, const std::string& name, int channels)
    : deep_(store, name + ".deep", channels, channels), shallow_(store, name + ".shallow", channels, channels) {}

template <class T>
Var<T> CascadeFuse<T>::operator()(const nn::Context& ctx, const Var<T>& deeper, const Var<T>& shallower) const {
    DSEG_CHECK(side(shallower) == 2 * side(deeper),
               "cascade fusion needs a size ratio of 2, got " + deeper.shape().str() + " -> " +
                   shallower.shape().str());
    return ops::add(deep_(ctx, up2(deeper)), shallow_(ctx, shallower));
}

template <class T>
TrunkDecoder<T>::TrunkDecoder(nn::ParamStore<T>& store, int channels)
    : head_(store, "trunk.head", channels, 1, 3, 1, 1, true, ParamGroup::head) {
    const char* names[] = {"trunk.fuse21", "trunk.fuse32", "trunk.fuse43", "trunk.fuse54"};
    for (const char* n : names) steps_.emplace_back(store, n, channels);
}

template <class T>
TrunkOutput<T> TrunkDecoder<T>::forward(const nn::Context& ctx, const std::vector<Feature<T>>& inputs,
                                        int hr_size) const {
    DSEG_CHECK(inputs.size() == 5, "trunk decoder takes 5 inputs, got " + std::to_string(inputs.size()));
    require_doubling(inputs, "trunk decoder");
    const char* names[] = {"T21", "T32", "T43", "T54"};
    TrunkOutput<T> out;
    Var<T> running = inputs[0].map;
    for (std::size_t i = 0; i < steps_.size(); ++i) {
        running = steps_[i](ctx, running, inputs[i + 1].map);
        out.taps.push_back({names[i], running});
    }
    out.logits = to_side(head_(running), hr_size);
    return out;
}

template <class T>
StructureFilter<T>::StructureFilter(nn::ParamStore<T>& store, const std::string& name, int trunk_channels,
                                    int structure_channels)
    : proj_(store, name, trunk_channels, structure_channels) {}

template <class T>
Var<T> StructureFilter<T>::operator()(const nn::Context& ctx, const Var<T>& lr_feature,
                                      const Var<T>& trunk_tap) const {
    require_same_size(lr_feature, trunk_tap, "structure filter");
    return ops::sub(lr_feature, proj_(ctx, trunk_tap));
}

template <class T>
StructureDecoder<T>::StructureDecoder(nn::ParamStore<T>& store, const ModelConfig& cfg)
    : use_filtering_(cfg.use_filtering),
      use_hr0_(cfg.use_hr0),
      hr_size_(cfg.hr_size),
      head_(store, "structure.head", cfg.structure_channels, 1, 3, 1, 1, true, ParamGroup::head) {
    if (use_filtering_) {
        for (int i = 1; i <= 3; ++i) {
            filters_.emplace_back(store, "structure.filter" + std::to_string(i), cfg.trunk_channels,
                                  cfg.structure_channels);
        }
    }
    const int n_steps = use_hr0_ ? 5 : 4;
    for (int i = 0; i < n_steps; ++i) {
        steps_.emplace_back(store, "structure.fuse" + std::to_string(i + 1), cfg.structure_channels);
    }
}

template <class T>
StructureOutput<T> StructureDecoder<T>::forward(const nn::Context& ctx, const std::vector<Feature<T>>& inputs,
                                                const TrunkOutput<T>& trunk) const {
    const std::size_t expected = use_hr0_ ? 6 : 5;
    DSEG_CHECK(inputs.size() == expected, "structure decoder takes " + std::to_string(expected) +
                                              " inputs, got " + std::to_string(inputs.size()));
    if (use_hr0_) DSEG_CHECK(inputs.back().name == "HR0", "structure decoder is missing HR0");
    require_doubling(inputs, "structure decoder");

    StructureOutput<T> out;
    for (std::size_t i = 0; i < 3; ++i) {
        if (use_filtering_) {
            DSEG_CHECK(trunk.taps.size() == 4, "filtering needs the trunk taps");
            out.filtered.push_back(filters_[i](ctx, inputs[i].map, trunk.taps[i + 1].map));
        } else {
            out.filtered.push_back(inputs[i].map);
        }
    }
    Var<T> running = out.filtered[0];
    for (std::size_t i = 0; i < steps_.size(); ++i) {
        const Var<T>& next = i + 1 < 3 ? out.filtered[i + 1] : inputs[i + 1].map;
        running = steps_[i](ctx, running, next);
        if (i + 1 >= 3) out.fused_taps.push_back({"S" + inputs[i + 1].name, running});
    }
    out.s65 = running;
    out.logits = to_side(head_(running), hr_size_);
    return out;
}

template <class T>
std::vector<Feature<T>> plain_fusion(const std::vector<Feature<T>>& inputs) {
    DSEG_CHECK(!inputs.empty(), "plain fusion needs at least one input");
    require_doubling(inputs, "plain fusion");
    std::vector<Feature<T>> out{inputs[0]};
    for (std::size_t i = 1; i < inputs.size(); ++i) {
        out.push_back({inputs[i].name, ops::add(up2(out.back().map), inputs[i].map)});
    }
    return out;
}

template <class T>
TrunkOutput<T> plain_trunk(const std::vector<Feature<T>>& inputs) {
    DSEG_CHECK(inputs.size() == 5, "trunk fusion takes 5 inputs");
    const auto chain = plain_fusion(inputs);
    const char* names[] = {"T21", "T32", "T43", "T54"};
    TrunkOutput<T> out;
    for (std::size_t i = 1; i < chain.size(); ++i) out.taps.push_back({names[i - 1], chain[i].map});
    return out;
}

template <class T>
StructureOutput<T> plain_structure(const std::vector<Feature<T>>& inputs) {
    DSEG_CHECK(inputs.size() == 5 || inputs.size() == 6, "structure fusion takes 5 or 6 inputs");
    const auto chain = plain_fusion(inputs);
    StructureOutput<T> out;
    for (std::size_t i = 0; i < 3; ++i) out.filtered.push_back(inputs[i].map);
    for (std::size_t i = 3; i < chain.size(); ++i) out.fused_taps.push_back({"S" + inputs[i].name, chain[i].map});
    out.s65 = chain.back().map;
    return out;
}

template <class T>
Aggregator<T>::Aggregator(nn::ParamStore<T>& store, const std::string& name, Aggregation kind,
                          int guide_channels, int structure_channels)
    : kind_(kind) {
    switch (kind) {
        case Aggregation::tsa:
            gate_ = C1<T>(store, name + ".gate", guide_channels, structure_channels);
            s_res_ = C1<T>(store, name + ".s_res", structure_channels, structure_channels);
            g_res_ = C1<T>(store, name + ".g_res", guide_channels, structure_channels);
            for (int i = 1; i <= 3; ++i) {
                conv_.emplace_back(store, name + ".conv" + std::to_string(i), structure_channels,
                                   structure_channels);
            }
            break;
        case Aggregation::add:
            if (guide_channels != structure_channels) {
                proj_.emplace(store, name + ".proj", guide_channels, structure_channels);
            }
            break;
        case Aggregation::concat:
            proj_.emplace(store, name + ".proj", guide_channels + structure_channels, structure_channels);
            break;
    }
}

template <class T>
Var<T> Aggregator<T>::operator()(const nn::Context& ctx, const Var<T>& guide, const Var<T>& structure) const {
    require_same_size(guide, structure, "aggregation");
    switch (kind_) {
        case Aggregation::tsa: {
            const Var<T> gated = ops::mul(structure, ops::sigmoid(gate_(ctx, guide)));
            Var<T> f = conv_[0](ctx, gated);
            f = conv_[1](ctx, ops::add(f, s_res_(ctx, structure)));
            return conv_[2](ctx, ops::add(f, g_res_(ctx, guide)));
        }
        case Aggregation::add:
            return ops::add(proj_ ? (*proj_)(ctx, guide) : guide, structure);
        case Aggregation::concat:
            return (*proj_)(ctx, ops::concat_channels(guide, structure));
    }
    return {};
}

int union_head_channels(const ModelConfig& cfg) { return std::max(1, cfg.structure_channels / 2); }

template <class T>
UnionDecoder<T>::UnionDecoder(nn::ParamStore<T>& store, const ModelConfig& cfg)
    : hr_size_(cfg.hr_size),
      head_mix_(store, "union.head.mix", cfg.structure_channels, union_head_channels(cfg)),
      head_out_(store, "union.head.out", union_head_channels(cfg), 1, 3, 1, 1, true, ParamGroup::head) {
    for (int i = 1; i <= 3; ++i) {
        tsa_.emplace_back(store, "union.tsa" + std::to_string(i), cfg.aggregation, cfg.trunk_channels,
                          cfg.structure_channels);
    }
    const int n_msa = cfg.use_hr0 ? 3 : 2;
    for (int i = 1; i <= n_msa; ++i) {
        msa_.emplace_back(store, "union.msa" + std::to_string(i), cfg.aggregation, cfg.structure_channels,
                          cfg.structure_channels);
    }
}

template <class T>
UnionOutput<T> UnionDecoder<T>::forward(const nn::Context& ctx, const TrunkOutput<T>& trunk,
                                        const StructureOutput<T>& structure) const {
    DSEG_CHECK(trunk.taps.size() == 4, "union decoder needs trunk taps T32, T43, T54");
    DSEG_CHECK(structure.filtered.size() == 3, "union decoder needs filtered S1, S2, S3");
    DSEG_CHECK(structure.fused_taps.size() == msa_.size(),
               "union decoder expects " + std::to_string(msa_.size()) + " fused structure taps, got " +
                   std::to_string(structure.fused_taps.size()));
    Var<T> f;
    for (std::size_t i = 0; i < 3; ++i) {
        const Var<T> fused = tsa_[i](ctx, trunk.taps[i + 1].map, structure.filtered[i]);
        f = i == 0 ? fused : ops::add(fused, up2(f));
    }
    for (std::size_t i = 0; i < msa_.size(); ++i) {
        const Var<T> fu = up2(f);
        f = ops::add(msa_[i](ctx, fu, structure.fused_taps[i].map), fu);
    }
    UnionOutput<T> out;
    out.feature = f;
    out.logits = to_side(head_out_(head_mix_(ctx, f)), hr_size_);
    return out;
}

#define DSEG_DECODERS_INSTANTIATE(T)                                                         \
    template Var<T> up2(const Var<T>&);                                                      \
    template class CascadeFuse<T>;                                                           \
    template class TrunkDecoder<T>;                                                          \
    template class StructureFilter<T>;                                                       \
    template class StructureDecoder<T>;                                                      \
    template class Aggregator<T>;                                                            \
    template class UnionDecoder<T>;                                                          \
    template std::vector<Feature<T>> plain_fusion(const std::vector<Feature<T>>&);           \
    template TrunkOutput<T> plain_trunk(const std::vector<Feature<T>>&);                     \
    template StructureOutput<T> plain_structure(const std::vector<Feature<T>>&);

DSEG_DECODERS_INSTANTIATE(float)
DSEG_DECODERS_INSTANTIATE(double)

}  // namespace dseg
