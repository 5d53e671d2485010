#include "dseg/model.hpp"

namespace dseg {

template <class T>
Model<T>::Model(const ModelConfig& cfg, std::uint64_t seed, bool meta)
    : cfg_(cfg), store_(std::make_unique<nn::ParamStore<T>>(seed, meta)) {
    cfg_.validate_buildable();
    auto& store = *store_;
    encoder_.emplace(store, cfg_);
    if (cfg_.use_trunk_decoder) trunk_.emplace(store, cfg_.trunk_channels);
    if (cfg_.use_structure_decoder) structure_.emplace(store, cfg_);
    union_.emplace(store, cfg_);

    NoGradGuard no_grad;
    const Var<T> hr(Tensor<T>::meta(Shape{1, 3, cfg_.hr_size, cfg_.hr_size}));
    const Var<T> lr(Tensor<T>::meta(Shape{1, 3, cfg_.lr_size, cfg_.lr_size}));
    const auto out = forward(nn::Context{}, hr, lr);
    DSEG_CHECK(out.mask_logits.shape() == (Shape{1, 1, cfg_.hr_size, cfg_.hr_size}),
               "mask logits have shape " + out.mask_logits.shape().str());
}

template <class T>
ModelOutput<T> Model<T>::forward(const nn::Context& ctx, const Var<T>& image_hr, const Var<T>& image_lr) const {
    const EncoderOutput<T> enc = encoder_->forward(ctx, image_hr, image_lr);
    ModelOutput<T> out;

    const TrunkOutput<T> trunk =
        trunk_ ? trunk_->forward(ctx, enc.trunk_inputs, cfg_.hr_size) : plain_trunk(enc.trunk_inputs);
    const StructureOutput<T> structure =
        structure_ ? structure_->forward(ctx, enc.structure_inputs, trunk) : plain_structure(enc.structure_inputs);
    const UnionOutput<T> fused = union_->forward(ctx, trunk, structure);

    out.mask_logits = fused.logits;
    out.trunk_logits = trunk.logits;
    out.structure_logits = structure.logits;
    out.t54 = trunk.T54();
    out.s65 = structure.s65;
    out.fused = fused.feature;
    return out;
}

std::size_t count_params(const ModelConfig& cfg) {
    const Model<float> m(cfg, 0, true);
    return m.store().count();
}

std::uint64_t count_macs(const ModelConfig& cfg) {
    const Model<float> m(cfg, 0, true);
    NoGradGuard no_grad;
    const Var<float> hr(Tensor<float>::meta(Shape{1, 3, cfg.hr_size, cfg.hr_size}));
    const Var<float> lr(Tensor<float>::meta(Shape{1, 3, cfg.lr_size, cfg.lr_size}));
    MacCounter counter;
    (void)m.forward(nn::Context{}, hr, lr);
    return counter.macs();
}

template class Model<float>;
template class Model<double>;

}  // namespace dseg
