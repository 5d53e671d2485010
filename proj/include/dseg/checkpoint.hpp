#pragma once

// Single-file checkpoints: an 8-byte tag, a format version, a JSON header
// (configs, counters, tensor directory) and a little-endian float32 blob.

#include <cstdint>
#include <string>
#include <vector>

#include "dseg/model.hpp"
#include "dseg/train_config.hpp"

namespace dseg {

inline constexpr char kCheckpointTag[8] = {'D', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class TensorRole { param, bn_mean, bn_var, momentum };

struct NamedTensor {
    std::string name;
    TensorRole role = TensorRole::param;
    Tensor<float> value;
};

struct Checkpoint {
    ModelConfig model;
    TrainConfig train;
    std::int64_t step = 0;  // optimizer steps taken
    int epoch = 0;          // completed epochs
    std::vector<NamedTensor> tensors;

    [[nodiscard]] const NamedTensor* find(const std::string& name, TensorRole role) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
/// Throws std::runtime_error with the reason on a wrong tag, version or truncated file.
Checkpoint load_checkpoint(const std::string& path);

/// Parameters and batch-norm statistics of `model`, plus momentum buffers if given
/// (one per parameter, in store order).
Checkpoint capture(const Model<float>& model, const TrainConfig& train, std::int64_t step, int epoch,
                   const std::vector<Tensor<float>>* momentum = nullptr);

/// Copies parameters and statistics into `model`. Every model tensor must be
/// present with a matching shape; otherwise throws naming the first offender.
void restore(Model<float>& model, const Checkpoint& ckpt);

/// Momentum buffers in store order (zeros for parameters without a stored buffer).
std::vector<Tensor<float>> restore_momentum(const Model<float>& model, const Checkpoint& ckpt);

}  // namespace dseg
