#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace lertlab {

// Dense row-major tensor. Just storage plus shape; all math lives in the
// functions that use it.
template <typename T>
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
        int64_t n = 1;
        for (int64_t d : shape) n *= d;
        data.assign(static_cast<size_t>(n), T{});
    }
    Tensor(std::initializer_list<int64_t> s) : Tensor(std::vector<int64_t>(s)) {}

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int64_t dim(size_t i) const { return shape[i]; }
    int64_t rows() const { return shape.size() < 2 ? 1 : numel() / shape.back(); }
    int64_t cols() const { return shape.empty() ? 0 : shape.back(); }

    T* row(int64_t r) { return data.data() + r * cols(); }
    const T* row(int64_t r) const { return data.data() + r * cols(); }

    void fill(T value) { data.assign(data.size(), value); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.reserve(data.size());
        for (T v : data) out.data.push_back(static_cast<U>(v));
        return out;
    }
};

}  // namespace lertlab
