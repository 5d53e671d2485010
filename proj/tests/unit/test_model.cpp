#include <random>
#include <set>

#include "../support/oracles.hpp"
#include "doctest.h"
#include "dseg/losses.hpp"
#include "dseg/kv_config.hpp"
#include "dseg/model.hpp"

using namespace dseg;

namespace {

ModelConfig small(int hr = 128, int lr = 32) {
    ModelConfig c = tiny_config();
    c.hr_size = hr;
    c.lr_size = lr;
    return c;
}

Tensor<float> noise(std::uint64_t seed, Shape s) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> nd;
    Tensor<float> t(s);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = nd(rng);
    return t;
}

ModelOutput<float> run(const Model<float>& m, int n, bool training = false) {
    const auto& c = m.config();
    nn::Context ctx;
    ctx.training = training;
    return m.forward(ctx, Var<float>(noise(1, {n, 3, c.hr_size, c.hr_size})),
                     Var<float>(noise(2, {n, 3, c.lr_size, c.lr_size})));
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("tiny model emits three full-resolution maps") {
    const Model<float> m(tiny_config(), 0);
    NoGradGuard ng;
    const auto out = run(m, 1);
    const Shape s{1, 1, 256, 256};
    CHECK(out.mask_logits.shape() == s);
    CHECK(out.trunk_logits.shape() == s);
    CHECK(out.structure_logits.shape() == s);
    CHECK(out.t54.shape().h == 32);  // trunk ends on HR3, 1/8 scale
    CHECK(out.s65.shape().h == 256);
    CHECK(out.fused.shape().h == 256);
}

TEST_CASE("meta models count the same parameters as real ones") {
    for (const char* preset : {"default", "no-dcm", "add", "concat", "no-hr0", "non-shared", "single-input"}) {
        CAPTURE(preset);
        const ModelConfig c = apply_preset(small(), preset);
        const Model<float> real(c, 0);
        CHECK(real.store().count() == count_params(c));
    }
}

TEST_CASE("shared backbone is counted once; twin backbones twice") {
    const ModelConfig shared = small();
    const ModelConfig twin = apply_preset(shared, "non-shared");
    const Model<float> a(shared, 0, true);
    const Model<float> b(twin, 0, true);
    CHECK(b.store().count(true) == 2 * a.store().count(true));
    CHECK(b.store().count() - b.store().count(true) == a.store().count() - a.store().count(true));
}

TEST_CASE("a shared backbone sees both inputs through the same weights") {
    Model<float> m(small(), 0);
    // Changing a backbone weight changes the low-resolution route too.
    NoGradGuard ng;
    nn::Context ctx;
    const auto base_lr = m.encoder().forward(ctx, Var<float>(noise(1, {1, 3, 128, 128})), Var<float>(noise(2, {1, 3, 32, 32})));
    for (auto& p : m.store().params())
        if (p.name == "backbone.stem.conv.weight" || p.name.rfind("backbone.", 0) == 0) {
            p.var.mutable_value()[0] += 1.0f;
            break;
        }
    const auto moved = m.encoder().forward(ctx, Var<float>(noise(1, {1, 3, 128, 128})), Var<float>(noise(2, {1, 3, 32, 32})));
    bool lr_changed = false;
    // The smallest trunk input (LR5) comes only from the low-resolution pass.
    const auto& a = base_lr.trunk_inputs.front().map.value();
    const auto& b = moved.trunk_inputs.front().map.value();
    for (std::size_t i = 0; i < a.numel(); ++i) lr_changed = lr_changed || a[i] != b[i];
    CHECK(base_lr.trunk_inputs.front().name == "LR5");
    CHECK(lr_changed);
}

TEST_CASE("route plans follow the regrouping rule") {
    ModelConfig c;
    auto plan = route_plan(c);
    CHECK(plan.trunk == std::vector<std::string>{"LR5", "LR4", "HR5", "HR4", "HR3"});
    CHECK(plan.structure == std::vector<std::string>{"LR3", "LR2", "LR1", "HR2", "HR1", "HR0"});
    c.use_dcm = false;
    c.use_hr0 = false;
    plan = route_plan(c);
    CHECK(plan.trunk == std::vector<std::string>{"LR5", "LR4", "LR3", "LR2", "LR1"});
    CHECK(plan.structure == std::vector<std::string>{"HR5", "HR4", "HR3", "HR2", "HR1"});
}

TEST_CASE("construction is deterministic in the seed") {
    const Model<float> a(small(), 7), b(small(), 7), c(small(), 8);
    bool differs = false;
    for (std::size_t i = 0; i < a.store().params().size(); ++i) {
        const auto& x = a.store().params()[i].var.value();
        const auto& y = b.store().params()[i].var.value();
        const auto& z = c.store().params()[i].var.value();
        CHECK(a.store().params()[i].name == b.store().params()[i].name);
        for (std::size_t j = 0; j < x.numel(); ++j) {
            REQUIRE(x[j] == y[j]);
            differs = differs || x[j] != z[j];
        }
    }
    CHECK(differs);
    NoGradGuard ng;
    const auto o1 = run(a, 1), o2 = run(b, 1);
    for (std::size_t i = 0; i < o1.mask_logits.value().numel(); ++i)
        REQUIRE(o1.mask_logits.value()[i] == o2.mask_logits.value()[i]);
}

TEST_CASE("every ablation preset builds and emits full-resolution maps") {
    for (const char* preset : {"no-dcm", "no-trunk-decoder", "no-structure-decoder", "add", "concat", "no-hr0",
                               "no-filtering", "single-input", "non-shared"}) {
        CAPTURE(preset);
        const ModelConfig c = apply_preset(small(), preset);
        const Model<float> m(c, 0);
        NoGradGuard ng;
        const auto out = run(m, 1);
        CHECK(out.mask_logits.shape() == Shape{1, 1, 128, 128});
        CHECK(out.trunk_logits.defined() == c.use_trunk_decoder);
        CHECK(out.structure_logits.defined() == c.use_structure_decoder);
        if (out.trunk_logits.defined()) CHECK(out.trunk_logits.shape() == Shape{1, 1, 128, 128});
        if (out.structure_logits.defined()) CHECK(out.structure_logits.shape() == Shape{1, 1, 128, 128});
    }
}

TEST_CASE("invalid configurations are rejected with a reason") {
    ModelConfig c = small();
    c.hr_size = 100;
    CHECK_THROWS_AS(Model<float>(c, 0, true), std::invalid_argument);
    c = small();
    c.lr_size = 48;
    CHECK_THROWS_AS(Model<float>(c, 0, true), std::invalid_argument);
    c = small();
    c.trunk_channels = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    CHECK_THROWS_AS(apply_preset(small(), "bogus"), std::invalid_argument);
}

TEST_CASE("config maps round-trip") {
    const ModelConfig c = apply_preset(apply_preset(small(), "concat"), "no-hr0");
    CHECK(ModelConfig::from_map(c.to_map()) == c);
    // One file carries model and training keys, so from_map ignores foreign
    // keys; the key set is validated against the union instead.
    CHECK_NOTHROW(ModelConfig::from_map({{"epochs", "1"}}));
    std::set<std::string> known;
    for (const auto& [k, v] : c.to_map()) known.insert(k);
    CHECK_NOTHROW(kv::require_known(c.to_map(), known));
    CHECK_THROWS(kv::require_known({{"no_such_key", "1"}}, known));
    CHECK_THROWS(ModelConfig::from_map({{"use_dcm", "maybe"}}));
}

TEST_CASE("filter, tsa and msa match literal transcriptions") {
    std::mt19937_64 rng(51);
    nn::ParamStore<double> store(3);
    const int tc = 6, sc = 4;
    const StructureFilter<double> filt(store, "f", tc, sc);
    const Aggregator<double> tsa(store, "t", Aggregation::tsa, tc, sc);
    const Aggregator<double> msa(store, "m", Aggregation::tsa, sc, sc);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    std::normal_distribution<double> nd(0, 0.3);
    for (auto& p : store.params()) {
        if (p.name.find(".bn.") == std::string::npos) continue;
        for (std::size_t i = 0; i < p.var.value().numel(); ++i) p.var.mutable_value()[i] = p.name.ends_with("weight") ? u(rng) : nd(rng);
    }
    for (auto& b : store.buffers()) {
        for (std::size_t i = 0; i < b.stats.mean.numel(); ++i) {
            b.stats.mean[i] = nd(rng);
            b.stats.var[i] = u(rng);
        }
    }
    nn::Context ctx;  // eval mode: fixed statistics
    auto rnd = [&](Shape s) {
        Tensor<double> t(s);
        for (std::size_t i = 0; i < t.numel(); ++i) t[i] = nd(rng) * 3;
        return t;
    };
    double worst = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const auto lr = rnd({2, sc, 6, 5}), t = rnd({2, tc, 6, 5}), s = rnd({2, sc, 6, 5}), g = rnd({2, sc, 6, 5});
        const auto f1 = filt(ctx, Var<double>(lr), Var<double>(t)).value();
        const auto f2 = oracle::filter(filt, lr, t, ctx.bn_eps);
        const auto a1 = tsa(ctx, Var<double>(t), Var<double>(s)).value();
        const auto a2 = oracle::tsa(tsa, t, s, ctx.bn_eps);
        const auto m1 = msa(ctx, Var<double>(g), Var<double>(s)).value();
        const auto m2 = oracle::tsa(msa, g, s, ctx.bn_eps);
        for (std::size_t i = 0; i < f1.numel(); ++i) worst = std::max(worst, std::fabs(f1[i] - f2[i]));
        for (std::size_t i = 0; i < a1.numel(); ++i) worst = std::max(worst, std::fabs(a1[i] - a2[i]));
        for (std::size_t i = 0; i < m1.numel(); ++i) worst = std::max(worst, std::fabs(m1[i] - m2[i]));
        // S + C1(T) recovers the low-resolution feature.
        const auto c1 = oracle::C1(filt.projection(), t, ctx.bn_eps);
        for (std::size_t i = 0; i < f1.numel(); ++i) CHECK(std::fabs(f1[i] + c1[i] - lr[i]) < 1e-12);
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("total loss sums the present terms") {
    const ModelConfig c = small();
    const Model<float> m(c, 0);
    NoGradGuard ng;
    const auto out = run(m, 2, true);
    LabelBatch<float> lb{Tensor<float>(2, 1, 128, 128), Tensor<float>(2, 1, 128, 128), Tensor<float>(2, 1, 128, 128)};
    for (std::size_t i = 0; i < lb.mask.numel(); i += 3) lb.mask[i] = lb.trunk[i] = 1;
    const auto L = total_loss(out, lb);
    const auto& r = L.report;
    CHECK(r.total == doctest::Approx(r.trunk_bce + r.structure_bce + r.mask_bce + r.mask_iou).epsilon(1e-6));
    CHECK(L.total.value()[0] == doctest::Approx(r.total).epsilon(1e-5));

    const Model<float> nt(apply_preset(c, "no-trunk-decoder"), 0);
    const auto L2 = total_loss(run(nt, 2, true), lb);
    CHECK_FALSE(L2.report.has_trunk);
    CHECK(L2.report.trunk_bce == 0);
}

TEST_CASE("counting covers the reference configurations") {
    ModelConfig r50;
    CHECK(count_params(r50) == 24452595);
    CHECK(count_macs(r50) == 149162295296ull);
    ModelConfig r18 = r50;
    r18.backbone = BackboneKind::resnet18;
    CHECK(count_params(r18) < count_params(r50));
}

}  // TEST_SUITE
