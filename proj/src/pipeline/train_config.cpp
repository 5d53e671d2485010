#include "dseg/train_config.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dseg/labels.hpp"

namespace dseg {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument("TrainConfig: " + msg);
}

std::string format_triple(const std::array<float, 3>& v) {
    return kv::format_float(v[0]) + "," + kv::format_float(v[1]) + "," + kv::format_float(v[2]);
}

std::array<float, 3> parse_triple(const std::string& key, const std::string& s) {
    std::array<float, 3> out{};
    std::istringstream in(s);
    std::string item;
    int i = 0;
    while (std::getline(in, item, ',')) {
        if (i == 3) break;
        kv::Map one{{key, item}};
        out[static_cast<std::size_t>(i++)] = static_cast<float>(kv::Reader(one).get_double(key, 0));
    }
    if (i != 3 || std::getline(in, item)) {
        throw std::invalid_argument("config key '" + key + "': expected three comma-separated numbers");
    }
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    require(backbone_lr_max > 0 && head_lr_max > 0, "learning rates must be positive");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(epochs >= 0, "epochs must be >= 0");
    require(warmup_fraction >= 0 && warmup_fraction <= 1, "warmup_fraction must lie in [0,1]");
    require(momentum >= 0 && momentum < 1, "momentum must lie in [0,1)");
    require(weight_decay >= 0, "weight_decay must be >= 0");
    require(hr_size > 0 && lr_size > 0, "input sizes must be positive");
    require(flip_prob >= 0 && flip_prob <= 1, "flip_prob must lie in [0,1]");
    require(crop_min > 0 && crop_min <= 1, "crop_min must lie in (0,1]");
    require(workers >= 1, "workers must be >= 1");
    require(checkpoint_every >= 1, "checkpoint_every must be >= 1");
    for (float s : norm.std) require(s > 0, "norm_std entries must be positive");
}

int TrainConfig::effective_band_width() const {
    return band_width >= 0 ? band_width : default_band_width(hr_size);
}

kv::Map TrainConfig::to_map() const {
    return {
        {"backbone_lr_max", kv::format_double(backbone_lr_max)},
        {"head_lr_max", kv::format_double(head_lr_max)},
        {"batch_size", std::to_string(batch_size)},
        {"epochs", std::to_string(epochs)},
        {"warmup_fraction", kv::format_double(warmup_fraction)},
        {"momentum", kv::format_double(momentum)},
        {"weight_decay", kv::format_double(weight_decay)},
        {"seed", std::to_string(seed)},
        {"hr_size", std::to_string(hr_size)},
        {"lr_size", std::to_string(lr_size)},
        {"augment", kv::format_bool(augment)},
        {"flip_prob", kv::format_double(flip_prob)},
        {"crop_min", kv::format_double(crop_min)},
        {"band_width", std::to_string(band_width)},
        {"workers", std::to_string(workers)},
        {"checkpoint_every", std::to_string(checkpoint_every)},
        {"backbone_weights", backbone_weights},
        {"norm_mean", format_triple(norm.mean)},
        {"norm_std", format_triple(norm.std)},
    };
}

TrainConfig TrainConfig::from_map(const kv::Map& kv) {
    TrainConfig c;
    kv::Reader r(kv);
    c.backbone_lr_max = r.get_double("backbone_lr_max", c.backbone_lr_max);
    c.head_lr_max = r.get_double("head_lr_max", c.head_lr_max);
    c.batch_size = r.get_int("batch_size", c.batch_size);
    c.epochs = r.get_int("epochs", c.epochs);
    c.warmup_fraction = r.get_double("warmup_fraction", c.warmup_fraction);
    c.momentum = r.get_double("momentum", c.momentum);
    c.weight_decay = r.get_double("weight_decay", c.weight_decay);
    const long long seed = r.get_int64("seed", static_cast<long long>(c.seed));
    require(seed >= 0, "seed must be >= 0");
    c.seed = static_cast<std::uint64_t>(seed);
    c.hr_size = r.get_int("hr_size", c.hr_size);
    c.lr_size = r.get_int("lr_size", c.lr_size);
    c.augment = r.get_bool("augment", c.augment);
    c.flip_prob = r.get_double("flip_prob", c.flip_prob);
    c.crop_min = r.get_double("crop_min", c.crop_min);
    c.band_width = r.get_int("band_width", c.band_width);
    c.workers = r.get_int("workers", c.workers);
    c.checkpoint_every = r.get_int("checkpoint_every", c.checkpoint_every);
    c.backbone_weights = r.get_string("backbone_weights", c.backbone_weights);
    if (auto it = kv.find("norm_mean"); it != kv.end()) c.norm.mean = parse_triple("norm_mean", it->second);
    if (auto it = kv.find("norm_std"); it != kv.end()) c.norm.std = parse_triple("norm_std", it->second);
    return c;
}

LearningRates lr_schedule(std::int64_t step, std::int64_t total_steps, const TrainConfig& cfg) {
    if (total_steps <= 0 || step < 0 || step >= total_steps) return {};
    const double total = static_cast<double>(total_steps);
    const double warm = cfg.warmup_fraction * total;
    const double s = static_cast<double>(step);
    double f = 1.0;
    if (s < warm) {
        f = s / warm;
    } else if (total > warm) {
        f = (total - s) / (total - warm);
    }
    f = std::clamp(f, 0.0, 1.0);
    return {cfg.backbone_lr_max * f, cfg.head_lr_max * f};
}

}  // namespace dseg
