#pragma once

// Parameter storage and the small set of layers the model is built from.

#include <cmath>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "dseg/ops.hpp"

namespace dseg::nn {

/// Optimizer group a parameter belongs to; the two groups get separate learning rates.
enum class ParamGroup { backbone, head };

template <class T>
struct Param {
    std::string name;
    Var<T> var;
    ParamGroup group;
};

template <class T>
struct NamedStats {
    std::string name;
    ops::BatchNormStats<T> stats;
};

/// Forward-pass settings shared by every layer of one call.
struct Context {
    bool training = false;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
};

/// Owns every trainable parameter and batch-norm buffer of a model, in
/// creation order. A meta store records shapes only.
template <class T>
class ParamStore {
public:
    explicit ParamStore(std::uint64_t seed = 0, bool meta = false) : rng_(seed), meta_(meta) {}
    ParamStore(const ParamStore&) = delete;
    ParamStore& operator=(const ParamStore&) = delete;

    [[nodiscard]] bool meta() const { return meta_; }

    /// He-normal weights with the given fan; used for every conv weight.
    Var<T> kaiming(const std::string& name, Shape s, double fan, ParamGroup g) {
        if (meta_) return add(name, Tensor<T>::meta(s), g);
        Tensor<T> t(s);
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan));
        for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(dist(rng_));
        return add(name, std::move(t), g);
    }

    Var<T> constant(const std::string& name, Shape s, T value, ParamGroup g) {
        if (meta_) return add(name, Tensor<T>::meta(s), g);
        return add(name, Tensor<T>(s, value), g);
    }

    ops::BatchNormStats<T>& stats(const std::string& name, int channels) {
        auto& e = stats_.emplace_back();
        e.name = name;
        if (!meta_) {
            e.stats.mean = Tensor<T>(1, channels, 1, 1, T(0));
            e.stats.var = Tensor<T>(1, channels, 1, 1, T(1));
        }
        return e.stats;
    }

    [[nodiscard]] const std::vector<Param<T>>& params() const { return params_; }
    std::vector<Param<T>>& params() { return params_; }
    [[nodiscard]] const std::deque<NamedStats<T>>& buffers() const { return stats_; }
    std::deque<NamedStats<T>>& buffers() { return stats_; }

    [[nodiscard]] std::size_t count(bool backbone_only = false) const {
        std::size_t n = 0;
        for (const auto& p : params_) {
            if (!backbone_only || p.group == ParamGroup::backbone) n += p.var.value().numel();
        }
        return n;
    }

    void zero_grad() {
        for (auto& p : params_) p.var.zero_grad();
    }

private:
    Var<T> add(const std::string& name, Tensor<T> t, ParamGroup g) {
        for (const auto& p : params_) DSEG_CHECK(p.name != name, "duplicate parameter " + name);
        Var<T> v(std::move(t), true);
        params_.push_back({name, v, g});
        return v;
    }

    std::vector<Param<T>> params_;
    std::deque<NamedStats<T>> stats_;
    std::mt19937_64 rng_;
    bool meta_;
};

template <class T>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(ParamStore<T>& store, const std::string& name, int in, int out, int k, int stride,
           int pad, bool bias, ParamGroup g, bool fan_out = false)
        : stride_(stride), pad_(pad) {
        const double fan = static_cast<double>(fan_out ? out : in) * k * k;
        weight_ = store.kaiming(name + ".weight", Shape{out, in, k, k}, fan, g);
        if (bias) bias_ = store.constant(name + ".bias", Shape{1, out, 1, 1}, T(0), g);
    }

    Var<T> operator()(const Var<T>& x) const { return ops::conv2d(x, weight_, bias_, stride_, pad_); }

    [[nodiscard]] const Var<T>& weight() const { return weight_; }
    [[nodiscard]] const Var<T>& bias() const { return bias_; }
    [[nodiscard]] int out_channels() const { return weight_.shape().n; }

private:
    Var<T> weight_;
    Var<T> bias_;
    int stride_ = 1;
    int pad_ = 0;
};

template <class T>
class BatchNorm2d {
public:
    BatchNorm2d() = default;
    BatchNorm2d(ParamStore<T>& store, const std::string& name, int channels, ParamGroup g)
        : gamma_(store.constant(name + ".weight", Shape{1, channels, 1, 1}, T(1), g)),
          beta_(store.constant(name + ".bias", Shape{1, channels, 1, 1}, T(0), g)),
          stats_(&store.stats(name, channels)) {}

    Var<T> operator()(const Context& ctx, const Var<T>& x, bool relu = false) const {
        return ops::batch_norm(x, gamma_, beta_, *stats_, ctx.training, static_cast<T>(ctx.bn_momentum),
                               static_cast<T>(ctx.bn_eps), relu);
    }

    [[nodiscard]] const Var<T>& gamma() const { return gamma_; }
    [[nodiscard]] const Var<T>& beta() const { return beta_; }
    [[nodiscard]] ops::BatchNormStats<T>& stats() const { return *stats_; }

private:
    Var<T> gamma_;
    Var<T> beta_;
    ops::BatchNormStats<T>* stats_ = nullptr;
};

/// Convolution followed by batch norm and, optionally, ReLU.
template <class T>
class ConvBn {
public:
    ConvBn() = default;
    ConvBn(ParamStore<T>& store, const std::string& name, int in, int out, int k, bool relu,
           ParamGroup g = ParamGroup::head, int stride = 1)
        : ConvBn(store, name + ".conv", name + ".bn", in, out, k, relu, g, stride, false) {}

    /// Explicit parameter names, used where the layout mirrors common checkpoints.
    ConvBn(ParamStore<T>& store, const std::string& conv_name, const std::string& bn_name, int in,
           int out, int k, bool relu, ParamGroup g, int stride, bool fan_out)
        : conv_(store, conv_name, in, out, k, stride, k / 2, false, g, fan_out),
          bn_(store, bn_name, out, g),
          relu_(relu) {}

    Var<T> operator()(const Context& ctx, const Var<T>& x) const {
        return bn_(ctx, conv_(x), relu_);
    }

    [[nodiscard]] const Conv2d<T>& conv() const { return conv_; }
    [[nodiscard]] const BatchNorm2d<T>& bn() const { return bn_; }

private:
    Conv2d<T> conv_;
    BatchNorm2d<T> bn_;
    bool relu_ = false;
};

}  // namespace dseg::nn
