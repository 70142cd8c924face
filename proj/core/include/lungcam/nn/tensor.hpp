#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lungcam/error.hpp"

namespace lungcam::nn {

/// Batch, channels, height, width.
struct Shape4 {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t count() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    std::size_t sample() const { return static_cast<std::size_t>(c) * h * w; }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    bool operator==(const Shape4&) const = default;
};

std::string to_string(const Shape4& s);

/// Contiguous NCHW tensor.
template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape4 shape, T fill = T{}) : shape_(shape), data_(shape.count(), fill) {}
    Tensor(Shape4 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
        if (data_.size() != shape_.count()) throw ShapeError("tensor data does not match shape " + to_string(shape_));
    }

    const Shape4& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> span() { return data_; }
    std::span<const T> span() const { return data_; }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    T operator[](std::size_t i) const { return data_[i]; }

    std::size_t index(int n, int c, int y, int x) const {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }
    T& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
    T at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

    T* sample(int n) { return data_.data() + static_cast<std::size_t>(n) * shape_.sample(); }
    const T* sample(int n) const { return data_.data() + static_cast<std::size_t>(n) * shape_.sample(); }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
    void reset(Shape4 shape, T v = T{}) {
        shape_ = shape;
        data_.assign(shape.count(), v);
    }

    bool all_finite() const;

private:
    Shape4 shape_;
    std::vector<T> data_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace lungcam::nn
