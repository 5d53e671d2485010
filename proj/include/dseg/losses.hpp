#pragma once

// Training objective: BCE on the trunk and structure maps, BCE + IoU on the mask.

#include "dseg/image.hpp"
#include "dseg/model.hpp"

namespace dseg {

struct LossReport {
    double trunk_bce = 0;
    double structure_bce = 0;
    double mask_bce = 0;
    double mask_iou = 0;
    double total = 0;
    bool has_trunk = true;      // false when the trunk decoder is ablated
    bool has_structure = true;  // false when the structure decoder is ablated
};

/// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] before the log.
inline constexpr double kProbFloor = 1e-12;

/// Mean of -[g log f + (1 - g) log(1 - f)] over pixels.
double bce_loss(const Plane& pred_prob, const Mask& target);
/// 1 - sum(f g) / sum(f + g - f g); 0 when both maps are empty.
double iou_loss(const Plane& pred_prob, const Mask& target);

/// Supervision targets for a batch, each [N,1,H,W] in {0,1}.
template <class T>
struct LabelBatch {
    Tensor<T> mask;
    Tensor<T> trunk;
    Tensor<T> structure;
};

template <class T>
struct Loss {
    Var<T> total;  // differentiable sum of the present terms
    LossReport report;
};

/// Applies the loss to model logits; absent auxiliary logits contribute 0.
template <class T>
Loss<T> total_loss(const ModelOutput<T>& out, const LabelBatch<T>& labels);

}  // namespace dseg
