#include "dseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace dseg {

namespace {

const char* role_name(TensorRole r) {
    switch (r) {
        case TensorRole::param: return "param";
        case TensorRole::bn_mean: return "bn_mean";
        case TensorRole::bn_var: return "bn_var";
        case TensorRole::momentum: return "momentum";
    }
    return "?";
}

TensorRole parse_role(const std::string& s) {
    if (s == "param") return TensorRole::param;
    if (s == "bn_mean") return TensorRole::bn_mean;
    if (s == "bn_var") return TensorRole::bn_var;
    if (s == "momentum") return TensorRole::momentum;
    throw std::runtime_error("checkpoint: unknown tensor role '" + s + "'");
}

template <class U>
void write_pod(std::ostream& out, U v) {
    static_assert(std::endian::native == std::endian::little, "little-endian host assumed");
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class U>
U read_pod(std::istream& in, const std::string& path) {
    U v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
        throw std::runtime_error("checkpoint " + path + " is truncated");
    }
    return v;
}

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name, TensorRole role) const {
    for (const auto& t : tensors) {
        if (t.role == role && t.name == name) return &t;
    }
    return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    nlohmann::json header;
    header["format"] = "dseg-checkpoint";
    header["version"] = kCheckpointVersion;
    header["model_config"] = ckpt.model.to_map();
    header["train_config"] = ckpt.train.to_map();
    header["step"] = ckpt.step;
    header["epoch"] = ckpt.epoch;
    auto& dir = header["tensors"] = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& t : ckpt.tensors) {
        const Shape s = t.value.shape();
        dir.push_back({{"name", t.name}, {"role", role_name(t.role)}, {"shape", {s.n, s.c, s.h, s.w}},
                       {"offset", offset}});
        offset += t.value.numel();
    }
    const std::string text = header.dump();

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write checkpoint " + tmp);
        out.write(kCheckpointTag, sizeof kCheckpointTag);
        write_pod<std::uint32_t>(out, kCheckpointVersion);
        write_pod<std::uint64_t>(out, text.size());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& t : ckpt.tensors) {
            out.write(reinterpret_cast<const char*>(t.value.data()),
                      static_cast<std::streamsize>(t.value.numel() * sizeof(float)));
        }
        if (!out) throw std::runtime_error("failed writing checkpoint " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    char tag[sizeof kCheckpointTag] = {};
    if (!in.read(tag, sizeof tag) || std::memcmp(tag, kCheckpointTag, sizeof tag) != 0) {
        throw std::runtime_error(path + " is not a checkpoint (bad file tag)");
    }
    const auto version = read_pod<std::uint32_t>(in, path);
    if (version != kCheckpointVersion) {
        throw std::runtime_error("checkpoint " + path + " has format version " + std::to_string(version) +
                                 ", expected " + std::to_string(kCheckpointVersion));
    }
    const auto len = read_pod<std::uint64_t>(in, path);
    if (len > (std::uint64_t{1} << 30)) throw std::runtime_error("checkpoint " + path + " header is implausibly large");
    std::string text(len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(len))) {
        throw std::runtime_error("checkpoint " + path + " is truncated");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("checkpoint " + path + " has a malformed header: " + e.what());
    }

    Checkpoint ckpt;
    try {
        ckpt.model = ModelConfig::from_map(header.at("model_config").get<kv::Map>());
        ckpt.train = TrainConfig::from_map(header.at("train_config").get<kv::Map>());
        ckpt.step = header.at("step").get<std::int64_t>();
        ckpt.epoch = header.at("epoch").get<int>();
        for (const auto& e : header.at("tensors")) {
            const auto sh = e.at("shape").get<std::vector<int>>();
            if (sh.size() != 4) throw std::runtime_error("tensor shape must have 4 extents");
            NamedTensor t;
            t.name = e.at("name").get<std::string>();
            t.role = parse_role(e.at("role").get<std::string>());
            t.value = Tensor<float>(Shape{sh[0], sh[1], sh[2], sh[3]});
            ckpt.tensors.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("checkpoint " + path + " header: " + e.what());
    }
    for (auto& t : ckpt.tensors) {
        if (!in.read(reinterpret_cast<char*>(t.value.data()),
                     static_cast<std::streamsize>(t.value.numel() * sizeof(float)))) {
            throw std::runtime_error("checkpoint " + path + " is truncated in tensor " + t.name);
        }
    }
    return ckpt;
}

Checkpoint capture(const Model<float>& model, const TrainConfig& train, std::int64_t step, int epoch,
                   const std::vector<Tensor<float>>* momentum) {
    Checkpoint c;
    c.model = model.config();
    c.train = train;
    c.step = step;
    c.epoch = epoch;
    const auto& params = model.store().params();
    for (const auto& p : params) c.tensors.push_back({p.name, TensorRole::param, p.var.value()});
    for (const auto& b : model.store().buffers()) {
        c.tensors.push_back({b.name, TensorRole::bn_mean, b.stats.mean});
        c.tensors.push_back({b.name, TensorRole::bn_var, b.stats.var});
    }
    if (momentum) {
        DSEG_CHECK(momentum->size() == params.size(), "one momentum buffer per parameter");
        for (std::size_t i = 0; i < params.size(); ++i) {
            c.tensors.push_back({params[i].name, TensorRole::momentum, (*momentum)[i]});
        }
    }
    return c;
}

namespace {

void copy_checked(Tensor<float>& dst, const NamedTensor* src, const std::string& name, const char* what) {
    if (!src) throw std::runtime_error("checkpoint lacks " + std::string(what) + " '" + name + "'");
    if (src->value.shape() != dst.shape()) {
        throw std::runtime_error("checkpoint " + std::string(what) + " '" + name + "' has shape " +
                                 src->value.shape().str() + ", model expects " + dst.shape().str());
    }
    dst = src->value;
}

}  // namespace

void restore(Model<float>& model, const Checkpoint& ckpt) {
    for (auto& p : model.store().params()) {
        copy_checked(p.var.mutable_value(), ckpt.find(p.name, TensorRole::param), p.name, "parameter");
    }
    for (auto& b : model.store().buffers()) {
        copy_checked(b.stats.mean, ckpt.find(b.name, TensorRole::bn_mean), b.name, "running mean of");
        copy_checked(b.stats.var, ckpt.find(b.name, TensorRole::bn_var), b.name, "running variance of");
    }
}

std::vector<Tensor<float>> restore_momentum(const Model<float>& model, const Checkpoint& ckpt) {
    std::vector<Tensor<float>> out;
    for (const auto& p : model.store().params()) {
        Tensor<float> buf(p.var.shape());
        if (const auto* m = ckpt.find(p.name, TensorRole::momentum)) copy_checked(buf, m, p.name, "momentum of");
        out.push_back(std::move(buf));
    }
    return out;
}

}  // namespace dseg
