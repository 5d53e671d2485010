#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "doctest.h"
#include "dseg/augment.hpp"
#include "dseg/infer.hpp"
#include "dseg/metrics.hpp"
#include "dseg/synthetic.hpp"
#include "dseg/train.hpp"

using namespace dseg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dseg_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ModelConfig small_model() {
    ModelConfig c = tiny_config();
    c.hr_size = 128;
    c.lr_size = 32;
    c.trunk_channels = 16;
    c.structure_channels = 8;
    return c;
}

TrainConfig small_train(int epochs) {
    TrainConfig t;
    t.hr_size = 128;
    t.lr_size = 32;
    t.batch_size = 2;
    t.epochs = epochs;
    t.seed = 5;
    return t;
}

bool same_tensors(const Checkpoint& a, const Checkpoint& b, TensorRole role) {
    for (const auto& t : a.tensors) {
        if (t.role != role) continue;
        const auto* u = b.find(t.name, role);
        if (!u || u->value.shape() != t.value.shape()) return false;
        for (std::size_t i = 0; i < t.value.numel(); ++i)
            if (t.value[i] != u->value[i]) return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("learning rate warms up linearly then decays linearly to zero") {
    TrainConfig c;
    c.backbone_lr_max = 0.01;
    c.head_lr_max = 0.1;
    c.warmup_fraction = 0.1;
    const std::int64_t total = 100;
    CHECK(lr_schedule(0, total, c).head == 0.0);
    CHECK(lr_schedule(5, total, c).head == doctest::Approx(0.05));
    CHECK(lr_schedule(10, total, c).head == doctest::Approx(0.1));
    CHECK(lr_schedule(55, total, c).head == doctest::Approx(0.05));
    CHECK(lr_schedule(99, total, c).head == doctest::Approx(0.1 / 90));
    CHECK(lr_schedule(100, total, c).head == 0.0);
    CHECK(lr_schedule(-1, total, c).head == 0.0);
    for (std::int64_t s = 0; s < total; ++s) {
        const auto r = lr_schedule(s, total, c);
        CHECK(r.backbone == doctest::Approx(r.head * 0.1));
        if (s > 10) CHECK(r.head < lr_schedule(s - 1, total, c).head);
    }
}

TEST_CASE("train config validation and round trip") {
    TrainConfig c;
    c.seed = 12345678901ull;
    c.norm.mean = {0.1f, 0.2f, 0.3f};
    CHECK(TrainConfig::from_map(c.to_map()) == c);
    auto bad = c;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.warmup_fraction = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.crop_min = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK(c.effective_band_width() == 5);
    c.hr_size = 256;
    CHECK(c.effective_band_width() == 1);
}

TEST_CASE("augmentation: identity draw, flip involution, crop bounds") {
    std::mt19937_64 rng(1);
    const Mask m = render_shape(ShapeKind::star, 64, rng);
    const RgbImage img = render_image(m, rng);
    const auto labels = decouple(m, 2);

    std::mt19937_64 r0(2);
    const auto [same_img, same_labels] = augment(img, labels, r0, 0.0, 1.0);
    CHECK(same_img == img);
    CHECK(same_labels.mask == labels.mask);
    CHECK(same_labels.trunk == labels.trunk);

    const AugmentDraw flip{true, 0, 0, 64, 64};
    CHECK(apply_augment(apply_augment(img, flip), flip) == img);
    CHECK(apply_augment(apply_augment(m, flip), flip) == m);
    CHECK_FALSE(apply_augment(m, flip) == m);
    CHECK(apply_augment(m, flip).at(10, 0) == m.at(10, 63));

    for (int i = 0; i < 50; ++i) {
        const auto d = draw_augment(rng, 64, 48, 0.5, 0.75);
        CHECK(d.crop_w >= 36);
        CHECK(d.crop_h >= 48);
        CHECK(d.x0 >= 0);
        CHECK(d.y0 >= 0);
        CHECK(d.x0 + d.crop_w <= 48);
        CHECK(d.y0 + d.crop_h <= 64);
        const auto [ai, al] = augment(img, labels, rng);
        CHECK(ai.height == 64);
        CHECK(al.mask.width == 64);
        CHECK(verify_triplet(al));
    }
}

TEST_CASE("dual input resizes and normalises both views") {
    RgbImage img(64, 64, 0.5f);
    const Normalization n;
    const DualInput d = make_dual_input(img, 16, n);
    CHECK(d.hr.height == 64);
    CHECK(d.lr.height == 16);
    for (int c = 0; c < 3; ++c) {
        CHECK(d.hr.at(c, 3, 5) == doctest::Approx((0.5f - n.mean[c]) / n.std[c]));
        CHECK(d.lr.at(c, 7, 1) == doctest::Approx((0.5f - n.mean[c]) / n.std[c]));
    }
    const Tensor<float> t = stack_images({&d.hr, &d.hr});
    CHECK(t.shape() == Shape{2, 3, 64, 64});
}

TEST_CASE("checkpoints round-trip and reject damaged files") {
    const fs::path dir = scratch("ckpt");
    Model<float> m(small_model(), 3);
    std::vector<Tensor<float>> mom;
    for (const auto& p : m.store().params()) mom.emplace_back(p.var.shape(), 0.25f);
    const auto c = capture(m, small_train(1), 17, 2, &mom);
    const std::string path = (dir / "a.ckpt").string();
    save_checkpoint(path, c);
    const auto back = load_checkpoint(path);
    CHECK(back.model == c.model);
    CHECK(back.train == c.train);
    CHECK(back.step == 17);
    CHECK(back.epoch == 2);
    CHECK(back.tensors.size() == c.tensors.size());
    for (TensorRole r : {TensorRole::param, TensorRole::bn_mean, TensorRole::bn_var, TensorRole::momentum})
        CHECK(same_tensors(c, back, r));

    Model<float> other(small_model(), 4);
    restore(other, back);
    const auto again = capture(other, small_train(1), 17, 2, &mom);
    CHECK(same_tensors(c, again, TensorRole::param));
    CHECK(restore_momentum(other, back)[0][0] == 0.25f);

    Model<float> wrong(apply_preset(small_model(), "concat"), 0);
    CHECK_THROWS(restore(wrong, back));

    const std::string bytes = slurp(path);
    std::ofstream(dir / "cut.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
    CHECK_THROWS(load_checkpoint((dir / "cut.ckpt").string()));
    std::string tagged = bytes;
    tagged[0] = 'X';
    std::ofstream(dir / "tag.ckpt", std::ios::binary) << tagged;
    CHECK_THROWS(load_checkpoint((dir / "tag.ckpt").string()));
    CHECK_THROWS(load_checkpoint((dir / "missing.ckpt").string()));
    fs::remove_all(dir);
}

TEST_CASE("synthetic datasets are deterministic and self-consistent") {
    const fs::path a = scratch("syn_a"), b = scratch("syn_b");
    const auto da = make_synthetic({6, 64, 9, -1}, a.string());
    make_synthetic({6, 64, 9, -1}, b.string());
    REQUIRE(da.size() == 6);
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), a);
        CHECK(slurp(e.path()) == slurp(b / rel));
    }
    CHECK(verify_dataset_labels(da).empty());
    const Dataset loaded = load_dataset(a.string());
    CHECK(loaded.size() == 6);
    CHECK(loaded.samples[1].id == "syn_0001");

    const auto dc = make_synthetic({6, 64, 10, -1}, (a / "other").string());
    CHECK(slurp(a / "gt" / "syn_0000.png") != slurp(a / "other" / "gt" / "syn_0000.png"));
    (void)dc;

    const fs::path e = scratch("syn_empty");
    const auto de = make_synthetic({0, 64, 1, -1}, e.string());
    CHECK(de.size() == 0);
    CHECK(fs::exists(e / "manifest.json"));
    CHECK(load_dataset(e.string()).size() == 0);
    for (const auto& p : {a, b, e}) fs::remove_all(p);
}

TEST_CASE("every synthetic kind renders non-trivial binary masks") {
    for (int k = 0; k < kShapeKinds; ++k) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(k));
        const Mask m = render_shape(static_cast<ShapeKind>(k), 128, rng);
        CHECK(m.count() > 50);
        CHECK(m.count() < m.size());
    }
    std::mt19937_64 rng(0);
    CHECK_THROWS(render_shape(ShapeKind::blob, 4, rng));
}

TEST_CASE("a one-pixel synthetic grid is invisible to HCE only inside the tolerance band") {
    std::mt19937_64 rng(3);
    const Mask grid = render_shape(ShapeKind::grid, 64, rng, 1);
    const Mask zero(64, 64);
    CHECK(metrics::hce(grid, grid, 5) == 0);
    CHECK(metrics::hce(zero, grid, 0) > metrics::hce(grid, grid, 0));
    CHECK(metrics::hce(grid, grid, 0) == 0);
    // Erosion by the tolerance radius removes 1-px lines entirely, so the
    // missed grid costs nothing at gamma = 5.
    CHECK(metrics::hce(zero, grid, 5) == 0);
}

TEST_CASE("dataset loading from im/gt directories and the data root variable") {
    const fs::path root = scratch("imgt");
    fs::create_directories(root / "set" / "im");
    fs::create_directories(root / "set" / "gt");
    std::mt19937_64 rng(4);
    for (int i = 0; i < 2; ++i) {
        const Mask m = render_shape(ShapeKind::blob, 32, rng);
        write_rgb_png((root / "set" / "im" / ("x" + std::to_string(i) + ".png")).string(), render_image(m, rng));
        write_mask_png((root / "set" / "gt" / ("x" + std::to_string(i) + ".png")).string(), m);
    }
    CHECK(load_dataset((root / "set").string()).size() == 2);
    ::setenv(kDataRootEnv, root.string().c_str(), 1);
    CHECK(load_dataset("set").size() == 2);
    ::unsetenv(kDataRootEnv);
    const auto s = load_sample(load_dataset((root / "set").string()).samples[0], 64);
    CHECK(s.image.height == 64);
    CHECK(s.mask.width == 64);
    write_rgb_png((root / "set" / "im" / "orphan.png").string(), RgbImage(32, 32));
    CHECK_THROWS(load_dataset((root / "set").string()));
    CHECK_THROWS(load_dataset((root / "nothing").string()));
    fs::remove_all(root);
}

TEST_CASE("trainer rejects bad inputs") {
    CHECK_THROWS(Trainer(Dataset{}, small_model(), small_train(1)));
    const fs::path dir = scratch("tr_bad");
    const auto ds = make_synthetic({2, 64, 1, -1}, dir.string());
    auto t = small_train(1);
    t.hr_size = 256;
    CHECK_THROWS(Trainer(ds, small_model(), t));
    fs::remove_all(dir);
}

TEST_CASE("zero epochs leave the initial weights in the checkpoint") {
    const fs::path dir = scratch("tr_zero");
    const auto ds = make_synthetic({2, 64, 1, -1}, (dir / "data").string());
    Trainer tr(ds, small_model(), small_train(0));
    TrainOptions o;
    o.out_dir = (dir / "run").string();
    const auto res = tr.run(o);
    CHECK(res.steps == 0);
    const auto ck = load_checkpoint(res.last_checkpoint);
    const Model<float> init(small_model(), small_train(0).seed);
    CHECK(same_tensors(capture(init, small_train(0), 0, 0), ck, TensorRole::param));
    CHECK(same_tensors(capture(init, small_train(0), 0, 0), ck, TensorRole::bn_var));
    fs::remove_all(dir);
}

TEST_CASE("resuming mid-run reproduces the uninterrupted log") {
    const fs::path dir = scratch("tr_resume");
    const auto ds = make_synthetic({4, 64, 2, -1}, (dir / "data").string());
    auto cfg = small_train(2);
    cfg.batch_size = 2;

    Trainer full(ds, small_model(), cfg);
    TrainOptions o1;
    o1.out_dir = (dir / "full").string();
    const auto a = full.run(o1);
    REQUIRE(a.log.size() == 4);

    Trainer first(ds, small_model(), cfg);
    TrainOptions o2;
    o2.out_dir = (dir / "part").string();
    o2.stop_after_epoch = 1;
    const auto p = first.run(o2);
    CHECK(p.epochs_completed == 1);
    Trainer second(ds, small_model(), cfg);
    second.resume((dir / "part" / "epoch_001.ckpt").string());
    CHECK(second.step() == 2);
    o2.stop_after_epoch = -1;
    const auto b = second.run(o2);
    REQUIRE(b.log.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) CHECK(to_json_line(a.log[i + 2]) == to_json_line(b.log[i]));
    CHECK(slurp(dir / "full" / "train_log.jsonl") == slurp(dir / "part" / "train_log.jsonl"));
    CHECK(same_tensors(load_checkpoint((dir / "full" / "last.ckpt").string()),
                       load_checkpoint((dir / "part" / "last.ckpt").string()), TensorRole::param));

    Trainer other(ds, apply_preset(small_model(), "add"), cfg);
    CHECK_THROWS(other.resume((dir / "part" / "epoch_001.ckpt").string()));
    fs::remove_all(dir);
}

TEST_CASE("sample loading with several workers gives the same batch") {
    const fs::path dir = scratch("tr_workers");
    const auto ds = make_synthetic({4, 64, 3, -1}, dir.string());
    auto cfg = small_train(1);
    const Trainer one(ds, small_model(), cfg);
    cfg.workers = 3;
    const Trainer three(ds, small_model(), cfg);
    const auto order = one.epoch_order(0);
    CHECK(order == three.epoch_order(0));
    const auto b1 = one.make_batch(0, 0, order);
    const auto b3 = three.make_batch(0, 0, order);
    for (std::size_t i = 0; i < b1.hr.numel(); ++i) REQUIRE(b1.hr[i] == b3.hr[i]);
    for (std::size_t i = 0; i < b1.labels.structure.numel(); ++i)
        REQUIRE(b1.labels.structure[i] == b3.labels.structure[i]);
    CHECK(one.epoch_order(1) != order);
    fs::remove_all(dir);
}

TEST_CASE("a non-finite loss aborts training with the configuration") {
    const fs::path dir = scratch("tr_nan");
    const auto ds = make_synthetic({2, 64, 1, -1}, dir.string());
    Trainer tr(ds, small_model(), small_train(1));
    for (auto& p : tr.model().store().params()) {
        if (p.name == "union.head.out.bias") p.var.mutable_value()[0] = std::nanf("");
    }
    try {
        tr.run();
        FAIL("expected divergence");
    } catch (const TrainingDiverged& e) {
        const std::string msg = e.what();
        CHECK(msg.find("non-finite loss") != std::string::npos);
        CHECK(msg.find("head_lr_max") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("inference is deterministic and a zeroed head gives sigmoid(bias)") {
    const fs::path dir = scratch("infer");
    const auto ds = make_synthetic({1, 64, 4, -1}, (dir / "data").string());
    Model<float> m(small_model(), 2);
    save_checkpoint((dir / "m.ckpt").string(), capture(m, small_train(1), 0, 0));
    InferOptions opts;
    opts.dump_aux = true;
    opts.dump_features = true;
    const auto w1 = infer(ds.samples[0].image_path, (dir / "m.ckpt").string(), (dir / "o1").string(), opts);
    const auto w2 = infer(ds.samples[0].image_path, (dir / "m.ckpt").string(), (dir / "o2").string(), opts);
    REQUIRE(w1.size() == 6);
    for (std::size_t i = 0; i < w1.size(); ++i) CHECK(slurp(w1[i]) == slurp(w2[i]));
    CHECK(read_gray(w1[0]).width == 64);

    for (auto& p : m.store().params()) {
        if (p.name == "union.head.out.weight") p.var.mutable_value().fill(0.0f);
        if (p.name == "union.head.out.bias") p.var.mutable_value()[0] = 0.7f;
    }
    const Prediction pr = predict(m, RgbImage(80, 96), Normalization{});
    CHECK(pr.mask.height == 80);
    CHECK(pr.mask.width == 96);
    const float expect = 1.0f / (1.0f + std::exp(-0.7f));
    for (float v : pr.mask.data) REQUIRE(v == doctest::Approx(expect).epsilon(1e-6));

    CHECK_THROWS(infer((dir / "none.png").string(), (dir / "m.ckpt").string(), (dir / "o3").string()));
    CHECK_THROWS(infer(ds.samples[0].image_path, (dir / "none.ckpt").string(), (dir / "o3").string()));
    fs::remove_all(dir);
}

TEST_CASE("step log lines are JSON without timing fields") {
    StepLog s;
    s.step = 3;
    s.epoch = 1;
    s.loss.total = 1.5;
    s.loss.has_trunk = false;
    const std::string line = to_json_line(s);
    CHECK(line.find("\"step\":3") != std::string::npos);
    CHECK(line.find("\"trunk_bce\":null") != std::string::npos);
    CHECK(line.find("time") == std::string::npos);
}

}  // TEST_SUITE
