#include "dseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dseg {

namespace {

void check_pair(const Plane& p, const Mask& g) {
    if (p.height != g.height || p.width != g.width) {
        throw std::invalid_argument("loss inputs differ in size: " + std::to_string(p.height) + "x" +
                                    std::to_string(p.width) + " vs " + std::to_string(g.height) + "x" +
                                    std::to_string(g.width));
    }
}

template <class T>
double scalar(const Var<T>& v) {
    return static_cast<double>(v.value()[0]);
}

}  // namespace

double bce_loss(const Plane& pred_prob, const Mask& target) {
    check_pair(pred_prob, target);
    double sum = 0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double f = std::clamp(static_cast<double>(pred_prob.data[i]), kProbFloor, 1.0 - kProbFloor);
        sum -= target.data[i] ? std::log(f) : std::log(1.0 - f);
    }
    return sum / static_cast<double>(target.size());
}

double iou_loss(const Plane& pred_prob, const Mask& target) {
    check_pair(pred_prob, target);
    double inter = 0;
    double uni = 0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double f = pred_prob.data[i];
        const double g = target.data[i];
        inter += f * g;
        uni += f + g - f * g;
    }
    return uni > 0 ? 1.0 - inter / uni : 0.0;
}

template <class T>
Loss<T> total_loss(const ModelOutput<T>& out, const LabelBatch<T>& labels) {
    DSEG_CHECK(out.mask_logits.defined(), "mask logits are required");
    Loss<T> loss;
    const Var<T> mask_bce = ops::bce_with_logits(out.mask_logits, labels.mask);
    const Var<T> mask_iou = ops::iou_with_logits(out.mask_logits, labels.mask);
    loss.total = ops::add(mask_bce, mask_iou);
    loss.report.mask_bce = scalar(mask_bce);
    loss.report.mask_iou = scalar(mask_iou);
    loss.report.has_trunk = out.trunk_logits.defined();
    if (loss.report.has_trunk) {
        const Var<T> t = ops::bce_with_logits(out.trunk_logits, labels.trunk);
        loss.report.trunk_bce = scalar(t);
        loss.total = ops::add(t, loss.total);
    }
    loss.report.has_structure = out.structure_logits.defined();
    if (loss.report.has_structure) {
        const Var<T> s = ops::bce_with_logits(out.structure_logits, labels.structure);
        loss.report.structure_bce = scalar(s);
        loss.total = ops::add(loss.total, s);
    }
    loss.report.total =
        loss.report.trunk_bce + loss.report.structure_bce + loss.report.mask_bce + loss.report.mask_iou;
    return loss;
}

template Loss<float> total_loss(const ModelOutput<float>&, const LabelBatch<float>&);
template Loss<double> total_loss(const ModelOutput<double>&, const LabelBatch<double>&);

}  // namespace dseg
