// Acceptance suite: one line per criterion, tolerances fixed below.
//
//   dseg_acceptance [--only 1,4,...] [--expect-fail 2,...]
//
// Exit status is 0 when the set of failing criteria equals the expected set.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support/oracles.hpp"
#include "CLI11.hpp"
#include "dseg/augment.hpp"
#include "dseg/infer.hpp"
#include "dseg/losses.hpp"
#include "dseg/metrics.hpp"
#include "dseg/model.hpp"
#include "dseg/ops.hpp"
#include "dseg/synthetic.hpp"
#include "dseg/train.hpp"

using namespace dseg;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------- tolerances
constexpr double kParamTol = 0.05;
constexpr double kFlopsTol = 0.10;
constexpr double kFlopsTolSmall = 0.15;
constexpr double kOracleTol = 1e-6;
constexpr double kScalarLossTol = 1e-9;
constexpr int kOracleTrials = 100;
constexpr int kGradWeights = 50;
constexpr double kGradEps = 1e-3;
constexpr double kGradTol = 1e-3;
constexpr int kMetricPairs = 200;
constexpr double kMetricTol = 1e-6;
constexpr int kMonotonePairs = 50;
constexpr int kLabelMasks = 100;
constexpr double kOverfitWf = 0.95;
constexpr double kOverfitHceDrop = 0.50;
constexpr int kSmokeSteps = 20;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

bool within(double v, double target, double rel) { return std::fabs(v - target) <= rel * target; }

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dseg_accept_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Tensor<double> widen(const Tensor<float>& t) {
    Tensor<double> d(t.shape());
    for (std::size_t i = 0; i < t.numel(); ++i) d[i] = t[i];
    return d;
}

// ---------------------------------------------------------------- 1
Outcome param_counts() {
    struct Row {
        const char* name;
        BackboneKind b;
        bool shared;
        double target;
    };
    const Row rows[] = {{"r18-shared", BackboneKind::resnet18, true, 12.33e6},
                        {"r34-shared", BackboneKind::resnet34, true, 22.45e6},
                        {"r50-shared", BackboneKind::resnet50, true, 25.05e6},
                        {"r50-twin", BackboneKind::resnet50, false, 48.65e6}};
    Outcome o{true, ""};
    for (const auto& r : rows) {
        ModelConfig c;
        c.backbone = r.b;
        c.shared_backbone = r.shared;
        const double n = static_cast<double>(count_params(c));
        const bool ok = within(n, r.target, kParamTol);
        o.pass = o.pass && ok;
        o.detail += fmt("%s %.2fM (target %.2fM%s) ", r.name, n / 1e6, r.target / 1e6, ok ? "" : ", out of band");
    }
    return o;
}

// ---------------------------------------------------------------- 2
Outcome flops() {
    ModelConfig dual;
    ModelConfig hr_only = dual;
    hr_only.input_mode = InputMode::single;
    ModelConfig lr_only = hr_only;
    lr_only.hr_size = 256;
    struct Row {
        const char* name;
        ModelConfig c;
        double target, tol;
    };
    const Row rows[] = {{"1024+256", dual, 142.3, kFlopsTol},
                        {"1024", hr_only, 131.9, kFlopsTol},
                        {"256", lr_only, 16.4, kFlopsTolSmall}};
    Outcome o{true, ""};
    for (const auto& r : rows) {
        const double g = static_cast<double>(count_macs(r.c)) / 1e9;
        const bool ok = within(g, r.target, r.tol);
        o.pass = o.pass && ok;
        o.detail += fmt("%s %.1f G (target %.1f +-%.0f%%%s) ", r.name, g, r.target, r.tol * 100, ok ? "" : ", out of band");
    }
    o.detail += "[conv multiply-accumulates]";
    return o;
}

// ---------------------------------------------------------------- 3
bool three_maps(const ModelOutput<float>& out, int n, int side) {
    const Shape s{n, 1, side, side};
    return out.mask_logits.shape() == s && out.trunk_logits.shape() == s && out.structure_logits.shape() == s;
}

Outcome shapes() {
    Outcome o{true, ""};
    NoGradGuard ng;
    const nn::Context ctx;
    for (const auto& c : {ModelConfig{}, tiny_config()}) {
        const Model<float> m(c, 0);
        Tensor<float> hr(Shape{1, 3, c.hr_size, c.hr_size}), lr(Shape{1, 3, c.lr_size, c.lr_size});
        std::mt19937_64 rng(3);
        std::normal_distribution<float> nd;
        for (std::size_t i = 0; i < hr.numel(); ++i) hr[i] = nd(rng);
        for (std::size_t i = 0; i < lr.numel(); ++i) lr[i] = nd(rng);
        const auto out = m.forward(ctx, Var<float>(hr), Var<float>(lr));
        const bool ok = three_maps(out, 1, c.hr_size);
        o.pass = o.pass && ok;
        o.detail += fmt("backbone %s at %d+%d -> %dx%d x3 %s; ", to_string(c.backbone).c_str(), c.hr_size, c.lr_size,
                        out.mask_logits.shape().h, out.mask_logits.shape().w, ok ? "ok" : "WRONG");
    }
    return o;
}

// ---------------------------------------------------------------- 4
Outcome equation_oracles() {
    std::mt19937_64 rng(404);
    std::uniform_int_distribution<int> side(1, 7), chans(1, 6), batch(1, 3);
    std::uniform_real_distribution<double> pos(0.5, 1.5);
    std::normal_distribution<double> nd(0, 1);
    double worst_mod = 0, worst_loss = 0;
    const nn::Context ctx;  // eval mode
    for (int trial = 0; trial < kOracleTrials; ++trial) {
        const int tc = chans(rng), sc = chans(rng), n = batch(rng), h = side(rng), w = side(rng);
        nn::ParamStore<double> store(static_cast<std::uint64_t>(trial));
        const StructureFilter<double> filt(store, "f", tc, sc);
        const Aggregator<double> tsa(store, "t", Aggregation::tsa, tc, sc);
        const Aggregator<double> msa(store, "m", Aggregation::tsa, sc, sc);
        for (auto& p : store.params())
            if (p.name.find(".bn.") != std::string::npos)
                for (std::size_t i = 0; i < p.var.value().numel(); ++i)
                    p.var.mutable_value()[i] = p.name.ends_with("weight") ? pos(rng) : 0.3 * nd(rng);
        for (auto& b : store.buffers())
            for (std::size_t i = 0; i < b.stats.mean.numel(); ++i) {
                b.stats.mean[i] = 0.3 * nd(rng);
                b.stats.var[i] = pos(rng);
            }
        auto rnd = [&](int c) {
            Tensor<double> t(Shape{n, c, h, w});
            for (std::size_t i = 0; i < t.numel(); ++i) t[i] = 2 * nd(rng);
            return t;
        };
        const auto lr = rnd(sc), t = rnd(tc), s = rnd(sc), g = rnd(sc);
        auto diff = [&](const Tensor<double>& a, const Tensor<double>& b) {
            double m = a.shape() == b.shape() ? 0.0 : INFINITY;
            for (std::size_t i = 0; m < INFINITY && i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
            worst_mod = std::max(worst_mod, m);
        };
        diff(filt(ctx, Var<double>(lr), Var<double>(t)).value(), oracle::filter(filt, lr, t, ctx.bn_eps));
        diff(tsa(ctx, Var<double>(t), Var<double>(s)).value(), oracle::tsa(tsa, t, s, ctx.bn_eps));
        diff(msa(ctx, Var<double>(g), Var<double>(s)).value(), oracle::tsa(msa, g, s, ctx.bn_eps));

        // Scalar losses on probability maps and on logits.
        Plane prob(h * 4, w * 4);
        Mask gt(h * 4, w * 4);
        std::vector<double> pf, gf;
        Tensor<double> logits(Shape{1, 1, h * 4, w * 4}), target(Shape{1, 1, h * 4, w * 4});
        std::vector<double> lp;
        for (std::size_t i = 0; i < prob.data.size(); ++i) {
            prob.data[i] = static_cast<float>(oracle::sig(3 * nd(rng)));
            gt.data[i] = nd(rng) > 0.3 ? 1 : 0;
            pf.push_back(prob.data[i]);
            gf.push_back(gt.data[i]);
            logits[i] = 3 * nd(rng);
            target[i] = gt.data[i];
            lp.push_back(oracle::sig(logits[i]));
        }
        worst_loss = std::max(worst_loss, std::fabs(bce_loss(prob, gt) - oracle::bce(pf, gf)));
        worst_loss = std::max(worst_loss, std::fabs(iou_loss(prob, gt) - oracle::iou(pf, gf)));
        const Var<double> lv(logits);
        worst_loss = std::max(worst_loss, std::fabs(ops::bce_with_logits(lv, target).value()[0] - oracle::bce(lp, gf)));
        worst_loss = std::max(worst_loss, std::fabs(ops::iou_with_logits(lv, target).value()[0] - oracle::iou(lp, gf)));
    }
    return {worst_mod <= kOracleTol && worst_loss <= kScalarLossTol,
            fmt("%d trials; filter/tsa/msa max |diff| %.2e (tol %.0e); bce/iou max |diff| %.2e (tol %.0e)",
                kOracleTrials, worst_mod, kOracleTol, worst_loss, kScalarLossTol)};
}

// ---------------------------------------------------------------- 5
Outcome gradient_check() {
    ModelConfig cfg = tiny_config();
    cfg.hr_size = 128;
    cfg.lr_size = 32;
    Model<double> m(cfg, 11);

    const fs::path dir = scratch_dir("grad");
    const Dataset ds = make_synthetic({2, 128, 5, -1}, dir.string());
    std::vector<RgbImage> hr, lr;
    std::vector<LabelTriplet> labels;
    for (const auto& rec : ds.samples) {
        const Sample s = load_sample(rec, 128);
        const DualInput d = make_dual_input(s.image, 32, Normalization{});
        hr.push_back(d.hr);
        lr.push_back(d.lr);
        labels.push_back(decouple(s.mask, 1));
    }
    fs::remove_all(dir);
    const Tensor<double> thr = widen(stack_images({&hr[0], &hr[1]}));
    const Tensor<double> tlr = widen(stack_images({&lr[0], &lr[1]}));
    const LabelBatch<double> lb{widen(stack_masks({&labels[0].mask, &labels[1].mask})),
                                widen(stack_masks({&labels[0].trunk, &labels[1].trunk})),
                                widen(stack_masks({&labels[0].structure, &labels[1].structure}))};

    nn::Context ctx;
    ctx.training = true;
    ctx.bn_momentum = 0.0;  // running statistics stay fixed across evaluations
    auto loss = [&] { return total_loss(m.forward(ctx, Var<double>(thr), Var<double>(tlr)), lb).total; };
    backward(loss());

    struct Pick {
        std::size_t param, index;
        double analytic;
    };
    auto& params = m.store().params();
    std::size_t total = 0;
    for (const auto& p : params) total += p.var.value().numel();
    std::mt19937_64 rng(55);
    std::uniform_int_distribution<std::size_t> any(0, total - 1);
    std::vector<Pick> picks;
    while (picks.size() < static_cast<std::size_t>(kGradWeights)) {
        std::size_t flat = any(rng), k = 0;
        while (flat >= params[k].var.value().numel()) flat -= params[k++].var.value().numel();
        picks.push_back({k, flat, params[k].var.has_grad() ? params[k].var.grad()[flat] : 0.0});
    }

    NoGradGuard ng;
    auto sweep = [&](double eps, int& failing, std::string& where) {
        double worst = 0;
        failing = 0;
        for (const auto& pk : picks) {
            double& w = params[pk.param].var.mutable_value()[pk.index];
            const double w0 = w;
            w = w0 + eps;
            const double up = loss().value()[0];
            w = w0 - eps;
            const double down = loss().value()[0];
            w = w0;
            const double numeric = (up - down) / (2 * eps);
            const double err = std::fabs(pk.analytic - numeric) /
                               std::max({std::fabs(pk.analytic), std::fabs(numeric), 1e-8});
            if (err > kGradTol) ++failing;
            if (err > worst) {
                worst = err;
                where = fmt("%s[%zu] analytic %.4e numeric %.4e", params[pk.param].name.c_str(), pk.index,
                            pk.analytic, numeric);
            }
        }
        return worst;
    };
    int failing = 0, failing_fine = 0;
    std::string where, where_fine;
    const double worst = sweep(kGradEps, failing, where);
    // Informational: the same weights with a step small enough to stay
    // between ReLU / max-pool kinks.
    const double worst_fine = sweep(1e-6, failing_fine, where_fine);
    return {worst <= kGradTol,
            fmt("%d weights, eps %.0e: %d above rel err %.0e, worst %.2e at %s | eps 1e-6 (not scored): %d above, "
                "worst %.2e",
                kGradWeights, kGradEps, failing, kGradTol, worst, where.c_str(), failing_fine, worst_fine)};
}

// ---------------------------------------------------------------- 6
Outcome metric_oracles() {
    std::mt19937_64 rng(606);
    int mismatches = 0, hce_self = 0, count_mis = 0;
    double worst = 0;
    for (int trial = 0; trial < kMetricPairs; ++trial) {
        const Mask gt = oracle::random_mask(rng, 16, 16, trial);
        const Plane pred = oracle::random_prediction(rng, gt, trial / 6);
        if (metrics::max_f_measure(pred, gt) != oracle::max_f(pred, gt)) ++mismatches;
        const auto tc = metrics::threshold_counts(pred, gt, 256);
        for (int k = 0; k < 256; ++k) {
            std::int64_t tp = 0, fp = 0;
            for (std::size_t i = 0; i < gt.data.size(); ++i)
                if (oracle::above(pred.data[i], k)) (gt.data[i] ? tp : fp)++;
            if (tp != tc.tp[k] || fp != tc.fp[k]) ++count_mis;
        }
        worst = std::max(worst, std::fabs(metrics::e_measure_mean(pred, gt) - oracle::e_measure(pred, gt)));
        worst = std::max(worst, std::fabs(metrics::mae(pred, gt) - oracle::mae(pred, gt)));
        worst = std::max(worst, std::fabs(metrics::s_measure(pred, gt) - oracle::s_measure(pred, gt)));
        worst = std::max(worst, std::fabs(metrics::weighted_f_measure(pred, gt) - oracle::weighted_f(pred, gt)));
        const Mask bin = threshold(pred, 0.5f);
        for (int gamma : {0, 1, 2, 3, 5})
            if (metrics::hce(bin, gt, gamma) != oracle::hce(bin, gt, gamma)) ++mismatches;
        if (metrics::hce(gt, gt, 5) != 0) ++hce_self;
    }

    // Monotonicity in gamma on geometric errors: disk gt against a shifted,
    // resized disk prediction.
    auto disk = [](int cx, int cy, int r) {
        Mask m(64, 64);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) m.at(y, x) = (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r;
        return m;
    };
    auto monotone = [](const Mask& pred, const Mask& gt) {
        std::int64_t prev = INT64_MAX;
        bool ok = true;
        for (int gamma : {0, 1, 3, 5, 9}) {
            const std::int64_t h = metrics::hce(pred, gt, gamma);
            ok = ok && h <= prev;
            prev = h;
        }
        return ok;
    };
    std::mt19937_64 mr(6060);
    std::uniform_int_distribution<int> centre(24, 40), radius(8, 20), shift(-8, 8), grow(-6, 6);
    int violations = 0;
    for (int trial = 0; trial < kMonotonePairs; ++trial) {
        const int cx = centre(mr), cy = centre(mr), r = radius(mr);
        const Mask gt = disk(cx, cy, r);
        const Mask pred = disk(cx + shift(mr), cy + shift(mr), std::max(1, r + grow(mr)));
        if (!monotone(pred, gt)) ++violations;
    }
    // Not part of the verdict: pixel-noise predictions, where erosion can
    // split a region or leave a more ragged outline.
    int noisy = 0;
    for (int trial = 0; trial < kMonotonePairs; ++trial) {
        std::mt19937_64 r(static_cast<std::uint64_t>(7000 + trial));
        const Mask gt = render_shape(static_cast<ShapeKind>(trial % kShapeKinds), 64, r, 3);
        if (!monotone(threshold(oracle::random_prediction(r, gt, trial % 4), 0.5f), gt)) ++noisy;
    }
    const bool ok = mismatches == 0 && count_mis == 0 && hce_self == 0 && worst <= kMetricTol && violations == 0;
    return {ok, fmt("%d pairs: exact mismatches (max-F, HCE) %d, threshold-count mismatches %d, "
                    "max |diff| E/MAE/S/wF %.2e (tol %.0e), hce(gt,gt)!=0 %d; gamma monotonicity "
                    "violations %d over %d disk pairs (noisy-prediction pairs, not scored: %d/%d)",
                    kMetricPairs, mismatches, count_mis, worst, kMetricTol, hce_self, violations, kMonotonePairs, noisy,
                    kMonotonePairs)};
}

// ---------------------------------------------------------------- 7
Outcome label_properties() {
    std::mt19937_64 rng(707);
    int bad = 0, nonmono = 0;
    for (int trial = 0; trial < kLabelMasks; ++trial) {
        const Mask m = trial % 2 ? oracle::random_mask(rng, 40, 40, trial)
                                 : render_shape(static_cast<ShapeKind>(trial / 2 % kShapeKinds), 64, rng);
        LabelTriplet prev;
        for (int d : {1, 3, 5}) {
            const LabelTriplet t = decouple(m, d);
            if (!verify_triplet(t)) ++bad;
            if (d > 1) {
                for (std::size_t i = 0; i < m.data.size(); ++i) {
                    // wider band: trunk shrinks, structure grows
                    if (t.trunk.data[i] > prev.trunk.data[i] || t.structure.data[i] < prev.structure.data[i]) {
                        ++nonmono;
                        break;
                    }
                }
            }
            prev = t;
        }
    }
    return {bad == 0 && nonmono == 0,
            fmt("%d masks x d in {1,3,5}: verify_triplet failures %d, monotonicity failures %d", kLabelMasks, bad,
                nonmono)};
}

// ---------------------------------------------------------------- 8
struct Scores {
    double wf = 0, hce = 0, ring_wf = 0;
};

Scores score(const Model<float>& m, const Dataset& ds, const Normalization& norm) {
    Scores s;
    for (const auto& rec : ds.samples) {
        const Sample smp = load_sample(rec, 256);
        const Plane p = predict(m, smp.image, norm).mask;
        const double wf = metrics::weighted_f_measure(p, smp.mask);
        s.wf += wf;
        s.hce += static_cast<double>(metrics::hce(threshold(p, 0.5f), smp.mask, 2));
        if (rec.id == "syn_0001") s.ring_wf = wf;
    }
    s.wf /= static_cast<double>(ds.size());
    s.hce /= static_cast<double>(ds.size());
    return s;
}

Outcome overfit() {
    const auto t0 = std::chrono::steady_clock::now();
    ModelConfig mc = tiny_config();
    mc.trunk_channels = 16;
    mc.structure_channels = 8;
    TrainConfig tc;
    tc.hr_size = 256;
    tc.lr_size = 64;
    tc.batch_size = 4;
    tc.epochs = 150;
    tc.augment = false;
    tc.seed = 1;
    tc.backbone_lr_max = 0.005;
    tc.head_lr_max = 0.05;
    const fs::path dir = scratch_dir("overfit");
    const Dataset ds = make_synthetic({8, 256, 7, -1}, dir.string());

    Trainer tr(ds, mc, tc);
    const Scores before = score(tr.model(), ds, tc.norm);
    const TrainResult res = tr.run();
    const Scores after = score(tr.model(), ds, tc.norm);
    fs::remove_all(dir);

    const double first = res.log.front().loss.total;
    const double at200 = res.log.size() > 200 ? res.log[200].loss.total : NAN;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double drop = before.hce > 0 ? 1 - after.hce / before.hce : 0;
    const bool ok = res.steps == 300 && after.wf >= kOverfitWf && drop >= kOverfitHceDrop;
    return {ok, fmt("%lld steps, weighted_f %.4f (>= %.2f), HCE(gamma=2) %.2f -> %.2f (drop %.0f%%, need %.0f%%); "
                    "loss %.3f -> %.3f at step 200 -> %.3f final; ring wF %.4f; %.0f s",
                    static_cast<long long>(res.steps), after.wf, kOverfitWf, before.hce, after.hce, drop * 100,
                    kOverfitHceDrop * 100, first, at200, res.log.back().loss.total, after.ring_wf, secs)};
}

// ---------------------------------------------------------------- 9
Outcome ablations() {
    const fs::path dir = scratch_dir("ablate");
    const Dataset ds = make_synthetic({2, 128, 9, -1}, dir.string());
    ModelConfig base = tiny_config();
    base.hr_size = 128;
    base.lr_size = 32;
    TrainConfig tc;
    tc.hr_size = 128;
    tc.lr_size = 32;
    tc.batch_size = 2;
    tc.epochs = kSmokeSteps;
    Outcome o{true, ""};
    for (const char* preset :
         {"no-dcm", "no-trunk-decoder", "no-structure-decoder", "add", "concat", "no-hr0", "no-filtering"}) {
        std::string verdict = "ok";
        try {
            const ModelConfig mc = apply_preset(base, preset);
            Trainer tr(ds, mc, tc);
            const auto res = tr.run();
            bool finite = true;
            for (const auto& s : res.log) finite = finite && std::isfinite(s.loss.total);
            NoGradGuard ng;
            const Tensor<float> hr(Shape{1, 3, 128, 128}, 0.1f), lr(Shape{1, 3, 32, 32}, 0.1f);
            const auto out = tr.model().forward(nn::Context{}, Var<float>(hr), Var<float>(lr));
            const Shape s{1, 1, 128, 128};
            bool shapes = out.mask_logits.shape() == s;
            shapes = shapes && (mc.use_trunk_decoder ? out.trunk_logits.shape() == s : !out.trunk_logits.defined());
            shapes = shapes &&
                     (mc.use_structure_decoder ? out.structure_logits.shape() == s : !out.structure_logits.defined());
            if (res.steps != kSmokeSteps) verdict = "wrong step count";
            else if (!finite) verdict = "non-finite loss";
            else if (!shapes) verdict = "bad output shapes";
        } catch (const std::exception& e) {
            verdict = e.what();
        }
        o.pass = o.pass && verdict == "ok";
        o.detail += std::string(preset) + " " + verdict + "; ";
    }
    o.detail += fmt("%d steps each at 128+32", kSmokeSteps);
    fs::remove_all(dir);
    return o;
}

// ---------------------------------------------------------------- 10
Outcome benchmark_layout() {
    const fs::path root = scratch_dir("dis");
    const fs::path tr = root / "DIS-TR";
    fs::create_directories(tr / "im");
    fs::create_directories(tr / "gt");
    std::mt19937_64 rng(10);
    for (int i = 0; i < 2; ++i) {
        const Mask m = render_shape(ShapeKind::plate, 128, rng);
        write_rgb_png((tr / "im" / fmt("%d#Misc#x.png", i)).string(), render_image(m, rng));
        write_mask_png((tr / "gt" / fmt("%d#Misc#x.png", i)).string(), m);
    }
    const Dataset ds = load_dataset(tr.string());
    ModelConfig mc = tiny_config();
    mc.hr_size = 128;
    mc.lr_size = 32;
    TrainConfig tc;
    tc.hr_size = 128;
    tc.lr_size = 32;
    tc.batch_size = 2;
    tc.epochs = 1;
    Trainer t(ds, mc, tc);
    const auto res = t.run();
    fs::remove_all(root);
    return {ds.size() == 2 && res.steps == 1,
            "informational: benchmark scores need the full dataset and pretrained backbones and are not "
            "reproduced here; an im/ + gt/ benchmark layout loads and trains"};
}

std::set<int> parse_list(const std::string& s) {
    std::set<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.insert(std::stoi(tok));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dseg acceptance suite"};
    std::string only, expect;
    app.add_option("--only", only, "comma-separated criteria to run");
    app.add_option("--expect-fail", expect, "criteria known to fail");
    CLI11_PARSE(app, argc, argv);
    const std::set<int> selected = parse_list(only), expected = parse_list(expect);

    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"parameter counts", param_counts},
        {"FLOPs", flops},
        {"output shapes", shapes},
        {"equation oracles", equation_oracles},
        {"gradient check", gradient_check},
        {"metric oracles", metric_oracles},
        {"label decoupling", label_properties},
        {"overfit", overfit},
        {"ablation presets", ablations},
        {"benchmark scores", benchmark_layout},
    };
    std::set<int> failed;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) failed.insert(id);
        std::printf("criterion %2d %-18s %s  %s\n", id, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    std::set<int> expected_run;
    for (int id : expected)
        if (selected.empty() || selected.count(id)) expected_run.insert(id);
    if (failed != expected_run) {
        std::printf("unexpected outcome: failing set differs from --expect-fail\n");
        return 1;
    }
    return 0;
}
