#pragma once

// Prediction with a trained model and the `infer` file workflow.

#include <memory>
#include <string>
#include <vector>

#include "dseg/checkpoint.hpp"
#include "dseg/image.hpp"

namespace dseg {

/// Maps at the input image's resolution. Auxiliary maps are empty when the
/// decoder is ablated; feature maps are filled only on request.
struct Prediction {
    Plane mask;
    Plane trunk;
    Plane structure;
    Plane t54;
    Plane s65;
    Plane fused;
};

/// Resizes to the model's input size, runs in eval mode and maps back.
/// Feature maps are the channel mean of |activation|, min-max scaled to [0,1].
Prediction predict(const Model<float>& model, const RgbImage& image, const Normalization& norm,
                   bool with_features = false);

struct LoadedModel {
    std::unique_ptr<Model<float>> model;
    TrainConfig train;
};

/// Builds the model described by a checkpoint and loads its tensors.
LoadedModel load_model(const std::string& checkpoint_path);

struct InferOptions {
    bool dump_aux = false;       // <id>_trunk.png, <id>_struct.png
    bool dump_features = false;  // <id>_t54.png, <id>_s65.png, <id>_fused.png
};

/// `input` is an image file or a directory of images. Writes <id>.png per
/// image into out_dir and returns the written paths.
std::vector<std::string> infer(const std::string& input, const std::string& checkpoint_path,
                               const std::string& out_dir, const InferOptions& opts = {});

}  // namespace dseg
