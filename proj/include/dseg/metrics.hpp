#pragma once

// Segmentation quality measures: maximal F, weighted F, MAE, S-measure,
// mean E-measure and human correction efforts (HCE).

#include <cstdint>
#include <string>
#include <vector>

#include "dseg/image.hpp"

namespace dseg::metrics {

/// Every constant the measures depend on.
struct Params {
    double f_beta2 = 0.3;          // maximal F
    int thresholds = 256;          // t_k = k / thresholds, positive iff pred > t_k
    double s_alpha = 0.5;          // object vs region weight
    double wf_beta2 = 1.0;         // weighted F
    int wf_kernel = 7;             // Gaussian window side
    double wf_sigma = 5.0;
    double wf_decay_distance = 5.0;  // background weight halves its excess every this many px
    int hce_gamma = 5;
    double hce_epsilon = 2.0;      // polygon simplification tolerance, px
    long long hce_min_area = -1;   // regions smaller than this are ignored; < 0 means gamma^2
    float hce_pred_threshold = 0.5f;  // prediction binarisation for HCE (pred > t)
};

/// Machine epsilon used to guard divisions, as in the common reference tools.
inline constexpr double kEps = 2.220446049250313e-16;

double max_f_measure(const Plane& pred, const Mask& gt, const Params& p = {});
double weighted_f_measure(const Plane& pred, const Mask& gt, const Params& p = {});
double mae(const Plane& pred, const Mask& gt);
double s_measure(const Plane& pred, const Mask& gt, const Params& p = {});
double e_measure_mean(const Plane& pred, const Mask& gt, const Params& p = {});

/// Polygon vertices needed to fix false-negative regions (eroded gt minus
/// prediction) and false-positive regions (prediction minus dilated gt).
std::int64_t hce(const Mask& pred, const Mask& gt, int gamma, const Params& p = {});

/// Per-threshold confusion counts of a continuous prediction; index k
/// refers to threshold k / thresholds.
struct ThresholdCounts {
    std::vector<std::int64_t> tp;
    std::vector<std::int64_t> fp;
    std::int64_t positives = 0;  // gt foreground pixels
    std::int64_t total = 0;
};
ThresholdCounts threshold_counts(const Plane& pred, const Mask& gt, int thresholds);

struct Report {
    std::string image_id;
    double max_f = 0;
    double weighted_f = 0;
    double mae = 0;
    double s_measure = 0;
    double e_measure = 0;
    std::int64_t hce = 0;
};

/// All six measures for one pair. HCE sees the prediction binarised at
/// `p.hce_pred_threshold`.
Report evaluate(const Plane& pred, const Mask& gt, const std::string& id, const Params& p = {});

/// Loads both files (8-bit values scaled to [0,1]; gt binarised at 0.5).
Report evaluate_pair(const std::string& pred_path, const std::string& gt_path, const Params& p = {});

struct Aggregate {
    std::size_t count = 0;
    double max_f = 0;
    double weighted_f = 0;
    double mae = 0;
    double s_measure = 0;
    double e_measure = 0;
    double hce = 0;  // mean over images
};
Aggregate aggregate(const std::vector<Report>& reports);

/// Evaluates every ground truth image in `gt_dir` against the file with the
/// same stem in `pred_dir`, on `jobs` threads. Reports are sorted by id.
std::vector<Report> evaluate_directory(const std::string& pred_dir, const std::string& gt_dir,
                                       const Params& p = {}, int jobs = 1);

}  // namespace dseg::metrics
