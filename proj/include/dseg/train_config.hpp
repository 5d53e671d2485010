#pragma once

// Optimisation and data settings for one training run.

#include <array>
#include <cstdint>
#include <string>

#include "dseg/kv_config.hpp"

namespace dseg {

/// Channelwise input normalisation, (v - mean) / std per RGB channel.
struct Normalization {
    std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
    std::array<float, 3> std{0.229f, 0.224f, 0.225f};
    friend bool operator==(const Normalization&, const Normalization&) = default;
};

struct TrainConfig {
    double backbone_lr_max = 0.005;
    double head_lr_max = 0.05;
    int batch_size = 8;
    int epochs = 48;
    double warmup_fraction = 0.05;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::uint64_t seed = 0;
    int hr_size = 1024;
    int lr_size = 256;

    bool augment = true;
    double flip_prob = 0.5;
    double crop_min = 0.75;  // crop side fraction drawn from U[crop_min, 1]
    int band_width = -1;     // < 0: default for hr_size
    int workers = 1;         // sample-loading threads
    int checkpoint_every = 1;  // epochs; the final checkpoint is always written
    std::string backbone_weights;  // optional checkpoint to take backbone.* tensors from
    Normalization norm;

    /// Throws std::invalid_argument.
    void validate() const;

    [[nodiscard]] int effective_band_width() const;

    [[nodiscard]] kv::Map to_map() const;
    static TrainConfig from_map(const kv::Map& kv);
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct LearningRates {
    double backbone = 0;
    double head = 0;
};

/// Linear warm-up from 0 over warmup_fraction * total_steps, then linear
/// decay to 0 at total_steps. Both groups follow the same curve.
LearningRates lr_schedule(std::int64_t step, std::int64_t total_steps, const TrainConfig& cfg);

}  // namespace dseg
