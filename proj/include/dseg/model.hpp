#pragma once

// The full network: encoder, trunk / structure / union decoders.

#include <cstdint>
#include <memory>
#include <optional>

#include "dseg/decoders.hpp"

namespace dseg {

template <class T>
struct ModelOutput {
    Var<T> mask_logits;       // [N,1,hr,hr]
    Var<T> trunk_logits;      // undefined when the trunk decoder is ablated
    Var<T> structure_logits;  // undefined when the structure decoder is ablated
    Var<T> t54;               // final trunk feature
    Var<T> s65;               // final structure feature
    Var<T> fused;             // union feature before the head
};

template <class T>
class Model {
public:
    /// Builds the network and runs a shape-only pass so wiring errors surface here.
    /// A meta model holds shapes only and is used for counting.
    explicit Model(const ModelConfig& cfg, std::uint64_t seed = 0, bool meta = false);

    /// `image_lr` is ignored (may be undefined) in single-input mode.
    [[nodiscard]] ModelOutput<T> forward(const nn::Context& ctx, const Var<T>& image_hr,
                                         const Var<T>& image_lr) const;

    [[nodiscard]] const ModelConfig& config() const { return cfg_; }
    [[nodiscard]] nn::ParamStore<T>& store() { return *store_; }
    [[nodiscard]] const nn::ParamStore<T>& store() const { return *store_; }
    [[nodiscard]] const Encoder<T>& encoder() const { return *encoder_; }
    [[nodiscard]] const TrunkDecoder<T>* trunk_decoder() const { return trunk_ ? &*trunk_ : nullptr; }
    [[nodiscard]] const StructureDecoder<T>* structure_decoder() const {
        return structure_ ? &*structure_ : nullptr;
    }
    [[nodiscard]] const UnionDecoder<T>& union_decoder() const { return *union_; }

private:
    ModelConfig cfg_;
    std::unique_ptr<nn::ParamStore<T>> store_;
    std::optional<Encoder<T>> encoder_;
    std::optional<TrunkDecoder<T>> trunk_;
    std::optional<StructureDecoder<T>> structure_;
    std::optional<UnionDecoder<T>> union_;
};

/// Trainable parameter count of a configuration (BN running stats excluded).
std::size_t count_params(const ModelConfig& cfg);

/// Multiply-accumulates of all convolutions for one forward pass of one image.
std::uint64_t count_macs(const ModelConfig& cfg);

}  // namespace dseg
