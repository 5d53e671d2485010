#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace dseg {

#define DSEG_CHECK(cond, msg)                                                   \
    do {                                                                        \
        if (!(cond)) throw std::invalid_argument(std::string(__func__) + ": " + (msg)); \
    } while (0)

/// NCHW extents. Scalars and vectors are expressed as degenerate 4D shapes.
struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    [[nodiscard]] std::size_t numel() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    [[nodiscard]] std::string str() const;
    friend bool operator==(const Shape&, const Shape&) = default;
};

/// Allocator that leaves elements uninitialised unless a value is given.
template <class T>
struct DefaultInitAllocator : std::allocator<T> {
    template <class U>
    struct rebind {
        using other = DefaultInitAllocator<U>;
    };
    using std::allocator<T>::allocator;
    template <class U>
    void construct(U* p) noexcept(std::is_nothrow_default_constructible_v<U>) {
        ::new (static_cast<void*>(p)) U;
    }
    template <class U, class... Args>
    void construct(U* p, Args&&... args) {
        ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
    }
};

/// Dense contiguous NCHW tensor with value semantics.
///
/// A tensor may be created in "meta" form, carrying only its shape. Meta
/// tensors flow through every op so that parameter and FLOP accounting can
/// walk the real model wiring without allocating activations.
template <class T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape s, T fill = T(0)) : shape_(s), data_(s.numel(), fill) {}
    Tensor(int n, int c, int h, int w, T fill = T(0)) : Tensor(Shape{n, c, h, w}, fill) {}

    /// Contents are indeterminate; for outputs that are fully overwritten.
    static Tensor uninit(Shape s) {
        Tensor t;
        t.shape_ = s;
        t.data_.resize(s.numel());
        return t;
    }

    static Tensor meta(Shape s) {
        Tensor t;
        t.shape_ = s;
        t.meta_ = true;
        return t;
    }

    [[nodiscard]] const Shape& shape() const { return shape_; }
    [[nodiscard]] int n() const { return shape_.n; }
    [[nodiscard]] int c() const { return shape_.c; }
    [[nodiscard]] int h() const { return shape_.h; }
    [[nodiscard]] int w() const { return shape_.w; }
    [[nodiscard]] std::size_t numel() const { return shape_.numel(); }
    [[nodiscard]] bool is_meta() const { return meta_; }
    [[nodiscard]] bool empty() const { return numel() == 0; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> span() { return data_; }
    std::span<const T> span() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
    const T& at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

    [[nodiscard]] std::size_t index(int n, int c, int y, int x) const {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }

    T* plane(int n, int c) { return data_.data() + index(n, c, 0, 0); }
    const T* plane(int n, int c) const { return data_.data() + index(n, c, 0, 0); }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    /// Same storage reinterpreted with a shape of equal element count.
    [[nodiscard]] Tensor reshaped(Shape s) const {
        DSEG_CHECK(s.numel() == numel(), "reshape " + shape_.str() + " -> " + s.str());
        Tensor t = *this;
        t.shape_ = s;
        return t;
    }

    template <class U>
    [[nodiscard]] Tensor<U> cast() const {
        if (meta_) return Tensor<U>::meta(shape_);
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    Shape shape_{};
    std::vector<T, DefaultInitAllocator<T>> data_;
    bool meta_ = false;
};

inline std::string Shape::str() const {
    return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + "]";
}

}  // namespace dseg
