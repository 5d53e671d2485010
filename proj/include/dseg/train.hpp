#pragma once

// SGD training loop with warm-up / linear-decay schedule, per-step JSON-lines
// logging and per-epoch checkpoints.

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dseg/checkpoint.hpp"
#include "dseg/dataset.hpp"
#include "dseg/losses.hpp"

namespace dseg {

struct StepLog {
    std::int64_t step = 0;
    int epoch = 0;
    LearningRates lr;
    LossReport loss;
};

/// One JSON object per line; contains no timing so identical runs give identical logs.
std::string to_json_line(const StepLog& s);

/// Raised when the loss stops being finite. The message names the step and dumps both configs.
class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainOptions {
    std::string out_dir;          // checkpoints and train_log.jsonl; empty writes nothing
    int stop_after_epoch = -1;    // return early once this many epochs are complete
    std::function<void(const StepLog&)> on_step;
};

struct TrainResult {
    std::vector<StepLog> log;
    std::string last_checkpoint;  // empty when out_dir is empty
    std::int64_t steps = 0;
    int epochs_completed = 0;
};

/// Seeds (seed, epoch, position, salt) into a generator; used for shuffling and augmentation.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t position, std::uint64_t salt);

class Trainer {
public:
    /// hr_size / lr_size must agree between the two configs. Rejects an empty dataset.
    Trainer(Dataset data, const ModelConfig& model_cfg, const TrainConfig& train_cfg);

    /// Continues from a checkpoint written by a run with the same model config.
    void resume(const std::string& checkpoint_path);

    TrainResult run(const TrainOptions& opts = {});

    [[nodiscard]] Model<float>& model() { return *model_; }
    [[nodiscard]] const TrainConfig& train_config() const { return train_; }
    [[nodiscard]] std::int64_t steps_per_epoch() const;
    [[nodiscard]] std::int64_t total_steps() const;
    [[nodiscard]] std::int64_t step() const { return step_; }
    [[nodiscard]] int epoch() const { return epoch_; }

    /// Inputs and labels of one batch, exactly as the training step sees them.
    struct Batch {
        Tensor<float> hr;
        Tensor<float> lr;
        LabelBatch<float> labels;
    };
    [[nodiscard]] Batch make_batch(int epoch, std::int64_t first_position, const std::vector<std::size_t>& indices) const;
    [[nodiscard]] std::vector<std::size_t> epoch_order(int epoch) const;

private:
    LossReport train_step(const Batch& batch, const LearningRates& lr);
    void save(const std::string& path) const;
    void load_backbone_weights(const std::string& path);

    Dataset data_;
    TrainConfig train_;
    std::unique_ptr<Model<float>> model_;
    std::vector<Tensor<float>> momentum_;
    std::int64_t step_ = 0;
    int epoch_ = 0;
};

}  // namespace dseg
