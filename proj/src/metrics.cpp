#include "dseg/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "dseg/morphology.hpp"

namespace dseg::metrics {

namespace fs = std::filesystem;

namespace {

void check_pair(const Plane& pred, const Mask& gt) {
    if (pred.height != gt.height || pred.width != gt.width) {
        throw std::invalid_argument("prediction is " + std::to_string(pred.height) + "x" +
                                    std::to_string(pred.width) + " but ground truth is " +
                                    std::to_string(gt.height) + "x" + std::to_string(gt.width));
    }
    if (pred.size() == 0) throw std::invalid_argument("empty image");
}

bool all_zero(const Plane& p) {
    return std::all_of(p.data.begin(), p.data.end(), [](float v) { return v == 0.0f; });
}

double f_score(double tp, double fp, double positives, double beta2) {
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = positives > 0 ? tp / positives : 0.0;
    const double den = beta2 * precision + recall;
    return den > 0 ? (1.0 + beta2) * precision * recall / den : 0.0;
}

}  // namespace

ThresholdCounts threshold_counts(const Plane& pred, const Mask& gt, int thresholds) {
    check_pair(pred, gt);
    if (thresholds < 1) throw std::invalid_argument("need at least one threshold");
    // A pixel with value v is positive for thresholds k < thresholds * v,
    // i.e. for the first ceil(thresholds * v) of them.
    std::vector<std::int64_t> fg_hist(static_cast<std::size_t>(thresholds) + 1, 0);
    std::vector<std::int64_t> bg_hist(fg_hist.size(), 0);
    ThresholdCounts c;
    c.total = static_cast<std::int64_t>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double scaled = std::ceil(static_cast<double>(pred.data[i]) * thresholds);
        const auto bin = static_cast<std::size_t>(std::clamp(scaled, 0.0, static_cast<double>(thresholds)));
        if (gt.data[i]) {
            ++fg_hist[bin];
            ++c.positives;
        } else {
            ++bg_hist[bin];
        }
    }
    c.tp.assign(static_cast<std::size_t>(thresholds), 0);
    c.fp.assign(static_cast<std::size_t>(thresholds), 0);
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    for (int k = thresholds - 1; k >= 0; --k) {
        tp += fg_hist[static_cast<std::size_t>(k) + 1];
        fp += bg_hist[static_cast<std::size_t>(k) + 1];
        c.tp[static_cast<std::size_t>(k)] = tp;
        c.fp[static_cast<std::size_t>(k)] = fp;
    }
    return c;
}

double max_f_measure(const Plane& pred, const Mask& gt, const Params& p) {
    const ThresholdCounts c = threshold_counts(pred, gt, p.thresholds);
    if (c.positives == 0) return all_zero(pred) ? 1.0 : 0.0;
    double best = 0.0;
    for (std::size_t k = 0; k < c.tp.size(); ++k) {
        best = std::max(best, f_score(static_cast<double>(c.tp[k]), static_cast<double>(c.fp[k]),
                                      static_cast<double>(c.positives), p.f_beta2));
    }
    return best;
}

double mae(const Plane& pred, const Mask& gt) {
    check_pair(pred, gt);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(static_cast<double>(pred.data[i]) - gt.data[i]);
    return sum / static_cast<double>(pred.size());
}

double e_measure_mean(const Plane& pred, const Mask& gt, const Params& p) {
    const ThresholdCounts c = threshold_counts(pred, gt, p.thresholds);
    const double n = static_cast<double>(c.total);
    const double g = static_cast<double>(c.positives);
    double total = 0.0;
    for (std::size_t k = 0; k < c.tp.size(); ++k) {
        const double tp = static_cast<double>(c.tp[k]);
        const double fp = static_cast<double>(c.fp[k]);
        const double pos = tp + fp;
        double enhanced_sum = 0.0;
        if (c.positives == 0) {
            enhanced_sum = n - pos;
        } else if (c.positives == c.total) {
            enhanced_sum = pos;
        } else {
            const double mean_fm = pos / n;
            const double mean_gt = g / n;
            // (prediction, gt) classes with their pixel counts.
            const double counts[4] = {tp, fp, g - tp, n - g - fp};
            const double fm_value[4] = {1, 1, 0, 0};
            const double gt_value[4] = {1, 0, 1, 0};
            for (int j = 0; j < 4; ++j) {
                if (counts[j] == 0) continue;
                const double df = fm_value[j] - mean_fm;
                const double dg = gt_value[j] - mean_gt;
                const double align = 2.0 * df * dg / (df * df + dg * dg + kEps);
                enhanced_sum += counts[j] * (align + 1.0) * (align + 1.0) / 4.0;
            }
        }
        total += enhanced_sum / n;
    }
    return total / static_cast<double>(c.tp.size());
}

namespace {

struct Block {
    std::vector<double> pred;
    std::vector<double> gt;
};

double ssim(const Block& b) {
    const double n = static_cast<double>(b.pred.size());
    if (b.pred.empty()) return 0.0;
    double x = 0, y = 0;
    for (std::size_t i = 0; i < b.pred.size(); ++i) {
        x += b.pred[i];
        y += b.gt[i];
    }
    x /= n;
    y /= n;
    double sx = 0, sy = 0, sxy = 0;
    for (std::size_t i = 0; i < b.pred.size(); ++i) {
        sx += (b.pred[i] - x) * (b.pred[i] - x);
        sy += (b.gt[i] - y) * (b.gt[i] - y);
        sxy += (b.pred[i] - x) * (b.gt[i] - y);
    }
    if (b.pred.size() > 1) {
        sx /= n - 1;
        sy /= n - 1;
        sxy /= n - 1;
    } else {
        sx = sy = sxy = 0;
    }
    const double alpha = 4 * x * y * sxy;
    const double beta = (x * x + y * y) * (sx + sy);
    if (alpha != 0) return alpha / (beta + kEps);
    return beta == 0 ? 1.0 : 0.0;
}

/// Mean-and-spread similarity of the prediction values inside one region.
double object_similarity(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    const double n = static_cast<double>(values.size());
    double mean = 0;
    for (const double v : values) mean += v;
    mean /= n;
    double var = 0;
    for (const double v : values) var += (v - mean) * (v - mean);
    const double sd = values.size() > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    return 2 * mean / (mean * mean + 1 + sd + kEps);
}

}  // namespace

double s_measure(const Plane& pred, const Mask& gt, const Params& p) {
    check_pair(pred, gt);
    const int h = gt.height;
    const int w = gt.width;
    const double n = static_cast<double>(gt.size());
    const double fg_fraction = static_cast<double>(gt.count()) / n;
    double pred_mean = 0;
    for (const float v : pred.data) pred_mean += v;
    pred_mean /= n;
    if (fg_fraction == 0) return 1.0 - pred_mean;
    if (fg_fraction == 1) return pred_mean;

    // Object term: foreground and background similarity.
    std::vector<double> fg, bg;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt.data[i]) {
            fg.push_back(pred.data[i]);
        } else {
            bg.push_back(1.0 - pred.data[i]);
        }
    }
    const double object = fg_fraction * object_similarity(fg) + (1 - fg_fraction) * object_similarity(bg);

    // Region term: four blocks split at the (1-based, rounded) gt centroid.
    double cy = 0, cx = 0;
    std::int64_t area = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (gt.at(y, x)) {
                cy += y;
                cx += x;
                ++area;
            }
        }
    }
    const int x0 = static_cast<int>(std::nearbyint(cx / static_cast<double>(area))) + 1;
    const int y0 = static_cast<int>(std::nearbyint(cy / static_cast<double>(area))) + 1;
    Block blocks[4];  // LT, RT, LB, RB
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int k = (y < y0 ? 0 : 2) + (x < x0 ? 0 : 1);
            blocks[k].pred.push_back(pred.at(y, x));
            blocks[k].gt.push_back(gt.at(y, x));
        }
    }
    const double area_total = static_cast<double>(h) * w;
    const double w1 = static_cast<double>(x0) * y0 / area_total;
    const double w2 = static_cast<double>(y0) * (w - x0) / area_total;
    const double w3 = static_cast<double>(h - y0) * x0 / area_total;
    const double w4 = 1 - w1 - w2 - w3;
    const double region = w1 * ssim(blocks[0]) + w2 * ssim(blocks[1]) + w3 * ssim(blocks[2]) + w4 * ssim(blocks[3]);

    return std::max(0.0, p.s_alpha * object + (1 - p.s_alpha) * region);
}

double weighted_f_measure(const Plane& pred, const Mask& gt, const Params& p) {
    check_pair(pred, gt);
    const int h = gt.height;
    const int w = gt.width;
    if (gt.count() == 0) return all_zero(pred) ? 1.0 : 0.0;

    std::vector<std::int32_t> nearest;
    const auto d2 = morph::squared_edt(gt, &nearest);

    std::vector<double> err(gt.size());
    for (std::size_t i = 0; i < gt.size(); ++i) err[i] = std::abs(static_cast<double>(pred.data[i]) - gt.data[i]);
    // Background pixels inherit the error of their nearest foreground pixel.
    std::vector<double> err_t(err);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (!gt.data[i]) err_t[i] = err[static_cast<std::size_t>(nearest[i])];
    }

    // Normalised Gaussian window.
    const int k = p.wf_kernel;
    const int r = k / 2;
    std::vector<double> kernel(static_cast<std::size_t>(k) * k);
    double kmax = 0;
    for (int y = 0; y < k; ++y) {
        for (int x = 0; x < k; ++x) {
            const double dy = y - r;
            const double dx = x - r;
            const double v = std::exp(-(dx * dx + dy * dy) / (2 * p.wf_sigma * p.wf_sigma));
            kernel[static_cast<std::size_t>(y) * k + x] = v;
            kmax = std::max(kmax, v);
        }
    }
    double ksum = 0;
    for (auto& v : kernel) {
        if (v < kEps * kmax) v = 0;
        ksum += v;
    }
    for (auto& v : kernel) v /= ksum;

    // Zero-padded filtering of the spread error.
    std::vector<double> err_a(gt.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int ky = 0; ky < k; ++ky) {
                const int yy = y + ky - r;
                if (yy < 0 || yy >= h) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int xx = x + kx - r;
                    if (xx < 0 || xx >= w) continue;
                    acc += kernel[static_cast<std::size_t>(ky) * k + kx] * err_t[static_cast<std::size_t>(yy) * w + xx];
                }
            }
            err_a[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }

    const double decay = std::log(0.5) / p.wf_decay_distance;
    double fg_count = 0, fg_err = 0, bg_err = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const bool fg = gt.data[i];
        const double min_e = (fg && err_a[i] < err[i]) ? err_a[i] : err[i];
        const double weight = fg ? 1.0 : 2.0 - std::exp(decay * std::sqrt(static_cast<double>(d2[i])));
        const double ew = min_e * weight;
        if (fg) {
            fg_count += 1;
            fg_err += ew;
        } else {
            bg_err += ew;
        }
    }
    const double tpw = fg_count - fg_err;
    const double recall = 1 - fg_err / fg_count;
    const double precision = tpw / (tpw + bg_err + kEps);
    return (1 + p.wf_beta2) * recall * precision / (recall + p.wf_beta2 * precision + kEps);
}

std::int64_t hce(const Mask& pred, const Mask& gt, int gamma, const Params& p) {
    if (pred.height != gt.height || pred.width != gt.width) {
        throw std::invalid_argument("prediction and ground truth differ in size");
    }
    if (gamma < 0) throw std::invalid_argument("gamma must be >= 0");
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (pred.data[i] > 1 || gt.data[i] > 1) throw std::invalid_argument("hce inputs must be binary");
    }
    const long long min_area = p.hce_min_area >= 0 ? p.hce_min_area : static_cast<long long>(gamma) * gamma;
    const Mask fn = morph::difference(morph::erode(gt, gamma), pred);
    const Mask fp = morph::difference(pred, morph::dilate(gt, gamma));
    std::int64_t vertices = 0;
    for (const Mask* m : {&fn, &fp}) {
        const morph::Components comps = morph::label_components(*m);
        for (int c = 0; c < comps.count(); ++c) {
            if (comps.areas[static_cast<std::size_t>(c)] < min_area) continue;
            const auto contour =
                morph::trace_outer_boundary(comps.labels, m->height, m->width, comps.first[static_cast<std::size_t>(c)]);
            vertices += static_cast<std::int64_t>(morph::simplify_closed(contour, p.hce_epsilon).size());
        }
    }
    return vertices;
}

Report evaluate(const Plane& pred, const Mask& gt, const std::string& id, const Params& p) {
    check_pair(pred, gt);
    Report r;
    r.image_id = id;
    r.max_f = max_f_measure(pred, gt, p);
    r.weighted_f = weighted_f_measure(pred, gt, p);
    r.mae = mae(pred, gt);
    r.s_measure = s_measure(pred, gt, p);
    r.e_measure = e_measure_mean(pred, gt, p);
    r.hce = hce(threshold(pred, p.hce_pred_threshold), gt, p.hce_gamma, p);
    return r;
}

Report evaluate_pair(const std::string& pred_path, const std::string& gt_path, const Params& p) {
    const Plane pred = read_gray(pred_path);
    const Plane gt = read_gray(gt_path);
    if (pred.height != gt.height || pred.width != gt.width) {
        throw std::invalid_argument("size mismatch: " + pred_path + " is " + std::to_string(pred.height) + "x" +
                                    std::to_string(pred.width) + ", " + gt_path + " is " +
                                    std::to_string(gt.height) + "x" + std::to_string(gt.width));
    }
    return evaluate(pred, threshold(gt, 0.5f), fs::path(gt_path).stem().string(), p);
}

Aggregate aggregate(const std::vector<Report>& reports) {
    Aggregate a;
    a.count = reports.size();
    if (reports.empty()) return a;
    for (const auto& r : reports) {
        a.max_f += r.max_f;
        a.weighted_f += r.weighted_f;
        a.mae += r.mae;
        a.s_measure += r.s_measure;
        a.e_measure += r.e_measure;
        a.hce += static_cast<double>(r.hce);
    }
    const double n = static_cast<double>(reports.size());
    a.max_f /= n;
    a.weighted_f /= n;
    a.mae /= n;
    a.s_measure /= n;
    a.e_measure /= n;
    a.hce /= n;
    return a;
}

namespace {

bool is_image(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

fs::path find_by_stem(const fs::path& dir, const std::string& stem) {
    for (const char* ext : {".png", ".jpg", ".jpeg", ".PNG", ".JPG"}) {
        const fs::path c = dir / (stem + ext);
        if (fs::exists(c)) return c;
    }
    return {};
}

}  // namespace

std::vector<Report> evaluate_directory(const std::string& pred_dir, const std::string& gt_dir, const Params& p,
                                       int jobs) {
    if (!fs::is_directory(gt_dir)) throw std::runtime_error("not a directory: " + gt_dir);
    if (!fs::is_directory(pred_dir)) throw std::runtime_error("not a directory: " + pred_dir);
    std::vector<std::pair<fs::path, fs::path>> pairs;
    for (const auto& e : fs::directory_iterator(gt_dir)) {
        if (!e.is_regular_file() || !is_image(e.path())) continue;
        const std::string stem = e.path().stem().string();
        const fs::path pred = find_by_stem(pred_dir, stem);
        if (pred.empty()) throw std::runtime_error("no prediction for " + stem + " in " + pred_dir);
        pairs.emplace_back(pred, e.path());
    }
    std::sort(pairs.begin(), pairs.end(),
              [](const auto& a, const auto& b) { return a.second.stem().string() < b.second.stem().string(); });

    std::vector<Report> out(pairs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < pairs.size(); i = next++) {
            try {
                out[i] = evaluate_pair(pairs[i].first.string(), pairs[i].second.string(), p);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(pairs.size())));
    std::vector<std::thread> threads;
    for (int t = 1; t < n_threads; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace dseg::metrics
