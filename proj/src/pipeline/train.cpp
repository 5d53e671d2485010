#include "dseg/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

#include "dseg/augment.hpp"
#include "json.hpp"

namespace dseg {

namespace fs = std::filesystem;

std::string to_json_line(const StepLog& s) {
    nlohmann::json j;
    j["step"] = s.step;
    j["epoch"] = s.epoch;
    j["lr_backbone"] = s.lr.backbone;
    j["lr_head"] = s.lr.head;
    j["trunk_bce"] = s.loss.has_trunk ? nlohmann::json(s.loss.trunk_bce) : nlohmann::json(nullptr);
    j["structure_bce"] = s.loss.has_structure ? nlohmann::json(s.loss.structure_bce) : nlohmann::json(nullptr);
    j["mask_bce"] = s.loss.mask_bce;
    j["mask_iou"] = s.loss.mask_iou;
    j["total"] = s.loss.total;
    return j.dump();
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t position, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(position),
                      static_cast<std::uint32_t>(position >> 32), static_cast<std::uint32_t>(salt)};
    return std::mt19937_64(seq);
}

namespace {

constexpr std::uint64_t kShuffleSalt = 1;
constexpr std::uint64_t kAugmentSalt = 2;

std::string config_dump(const ModelConfig& m, const TrainConfig& t) {
    return "model config:\n" + kv::dump(m.to_map()) + "train config:\n" + kv::dump(t.to_map());
}

}  // namespace

Trainer::Trainer(Dataset data, const ModelConfig& model_cfg, const TrainConfig& train_cfg)
    : data_(std::move(data)), train_(train_cfg) {
    train_.validate();
    if (data_.samples.empty()) throw std::invalid_argument("training dataset is empty");
    if (model_cfg.hr_size != train_.hr_size || model_cfg.lr_size != train_.lr_size) {
        throw std::invalid_argument("model and train configs disagree on input sizes (" +
                                    std::to_string(model_cfg.hr_size) + "/" + std::to_string(model_cfg.lr_size) +
                                    " vs " + std::to_string(train_.hr_size) + "/" +
                                    std::to_string(train_.lr_size) + ")");
    }
    model_ = std::make_unique<Model<float>>(model_cfg, train_.seed);
    if (!train_.backbone_weights.empty()) load_backbone_weights(train_.backbone_weights);
    for (const auto& p : model_->store().params()) momentum_.emplace_back(p.var.shape());
}

void Trainer::load_backbone_weights(const std::string& path) {
    const Checkpoint src = load_checkpoint(path);
    std::size_t loaded = 0;
    auto is_backbone = [](const std::string& n) { return n.rfind("backbone", 0) == 0; };
    for (auto& p : model_->store().params()) {
        if (!is_backbone(p.name)) continue;
        if (const auto* t = src.find(p.name, TensorRole::param); t && t->value.shape() == p.var.shape()) {
            p.var.mutable_value() = t->value;
            ++loaded;
        }
    }
    for (auto& b : model_->store().buffers()) {
        if (!is_backbone(b.name)) continue;
        const auto* m = src.find(b.name, TensorRole::bn_mean);
        const auto* v = src.find(b.name, TensorRole::bn_var);
        if (m && v && m->value.shape() == b.stats.mean.shape() && v->value.shape() == b.stats.var.shape()) {
            b.stats.mean = m->value;
            b.stats.var = v->value;
        }
    }
    if (loaded == 0) throw std::runtime_error("no backbone tensor in " + path + " matches the model");
}

void Trainer::resume(const std::string& checkpoint_path) {
    const Checkpoint c = load_checkpoint(checkpoint_path);
    if (!(c.model == model_->config())) {
        throw std::runtime_error("incompatible checkpoint " + checkpoint_path + ": model config differs\n" +
                                 kv::dump(c.model.to_map()));
    }
    restore(*model_, c);
    momentum_ = restore_momentum(*model_, c);
    step_ = c.step;
    epoch_ = c.epoch;
}

std::int64_t Trainer::steps_per_epoch() const {
    const auto n = static_cast<std::int64_t>(data_.size());
    return (n + train_.batch_size - 1) / train_.batch_size;
}

std::int64_t Trainer::total_steps() const { return steps_per_epoch() * train_.epochs; }

std::vector<std::size_t> Trainer::epoch_order(int epoch) const {
    std::vector<std::size_t> order(data_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_rng(train_.seed, static_cast<std::uint64_t>(epoch), 0, kShuffleSalt);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

Trainer::Batch Trainer::make_batch(int epoch, std::int64_t first_position,
                                   const std::vector<std::size_t>& indices) const {
    const std::size_t n = indices.size();
    std::vector<DualInput> inputs(n);
    std::vector<LabelTriplet> labels(n);
    const int band = train_.effective_band_width();

    auto prepare = [&](std::size_t j) {
        Sample s = load_sample(data_.samples[indices[j]], train_.hr_size);
        LabelTriplet t = decouple(s.mask, band);
        RgbImage img = std::move(s.image);
        if (train_.augment) {
            auto rng = make_rng(train_.seed, static_cast<std::uint64_t>(epoch),
                                static_cast<std::uint64_t>(first_position) + j, kAugmentSalt);
            std::tie(img, t) = augment(img, t, rng, train_.flip_prob, train_.crop_min);
        }
        inputs[j] = make_dual_input(img, train_.lr_size, train_.norm);
        labels[j] = std::move(t);
    };

    const int workers = std::min<int>(train_.workers, static_cast<int>(n));
    if (workers <= 1) {
        for (std::size_t j = 0; j < n; ++j) prepare(j);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t j; (j = next.fetch_add(1)) < n;) prepare(j);
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    std::vector<const RgbImage*> hr, lr;
    std::vector<const Mask*> mask, trunk, structure;
    for (std::size_t j = 0; j < n; ++j) {
        hr.push_back(&inputs[j].hr);
        lr.push_back(&inputs[j].lr);
        mask.push_back(&labels[j].mask);
        trunk.push_back(&labels[j].trunk);
        structure.push_back(&labels[j].structure);
    }
    return {stack_images(hr), stack_images(lr), {stack_masks(mask), stack_masks(trunk), stack_masks(structure)}};
}

LossReport Trainer::train_step(const Batch& batch, const LearningRates& lr) {
    auto& store = model_->store();
    store.zero_grad();
    nn::Context ctx;
    ctx.training = true;
    const ModelOutput<float> out = model_->forward(ctx, Var<float>(batch.hr), Var<float>(batch.lr));
    Loss<float> loss = total_loss(out, batch.labels);
    if (!std::isfinite(loss.report.total)) {
        throw TrainingDiverged("non-finite loss at step " + std::to_string(step_) + " (epoch " +
                               std::to_string(epoch_) + ")\n" + config_dump(model_->config(), train_));
    }
    backward(loss.total);

    const auto mom = static_cast<float>(train_.momentum);
    const auto wd = static_cast<float>(train_.weight_decay);
    auto& params = store.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (!p.var.has_grad()) continue;
        const float rate = static_cast<float>(p.group == nn::ParamGroup::backbone ? lr.backbone : lr.head);
        float* w = p.var.mutable_value().data();
        const float* g = p.var.grad().data();
        float* buf = momentum_[i].data();
        for (std::size_t k = 0, n = p.var.value().numel(); k < n; ++k) {
            buf[k] = mom * buf[k] + (g[k] + wd * w[k]);
            w[k] -= rate * buf[k];
        }
    }
    return loss.report;
}

void Trainer::save(const std::string& path) const {
    save_checkpoint(path, capture(*model_, train_, step_, epoch_, &momentum_));
}

TrainResult Trainer::run(const TrainOptions& opts) {
    TrainResult res;
    std::ofstream log;
    if (!opts.out_dir.empty()) {
        fs::create_directories(opts.out_dir);
        const bool resumed = step_ > 0 || epoch_ > 0;
        log.open(fs::path(opts.out_dir) / "train_log.jsonl", resumed ? std::ios::app : std::ios::trunc);
        if (!log) throw std::runtime_error("cannot write training log in " + opts.out_dir);
    }
    const std::int64_t total = total_steps();
    const std::int64_t per_epoch = steps_per_epoch();
    const auto batch = static_cast<std::size_t>(train_.batch_size);

    while (epoch_ < train_.epochs && (opts.stop_after_epoch < 0 || epoch_ < opts.stop_after_epoch)) {
        const auto order = epoch_order(epoch_);
        for (std::int64_t b = 0; b < per_epoch; ++b) {
            const std::size_t lo = static_cast<std::size_t>(b) * batch;
            const std::size_t hi = std::min(order.size(), lo + batch);
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                               order.begin() + static_cast<std::ptrdiff_t>(hi));
            const Batch data = make_batch(epoch_, static_cast<std::int64_t>(lo), idx);
            StepLog s;
            s.step = step_;
            s.epoch = epoch_;
            s.lr = lr_schedule(step_, total, train_);
            s.loss = train_step(data, s.lr);
            ++step_;
            if (log.is_open()) log << to_json_line(s) << '\n' << std::flush;
            if (opts.on_step) opts.on_step(s);
            res.log.push_back(s);
        }
        ++epoch_;
        if (!opts.out_dir.empty() && (epoch_ % train_.checkpoint_every == 0 || epoch_ == train_.epochs)) {
            char name[32];
            std::snprintf(name, sizeof name, "epoch_%03d.ckpt", epoch_);
            save((fs::path(opts.out_dir) / name).string());
        }
    }
    if (!opts.out_dir.empty()) {
        res.last_checkpoint = (fs::path(opts.out_dir) / "last.ckpt").string();
        save(res.last_checkpoint);
    }
    res.steps = step_;
    res.epochs_completed = epoch_;
    return res;
}

}  // namespace dseg
