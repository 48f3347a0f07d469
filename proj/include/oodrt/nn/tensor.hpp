#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "oodrt/core/error.hpp"

namespace oodrt::nn {

using Dims = std::vector<std::size_t>;

inline std::size_t dims_product(const Dims& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string dims_to_string(const Dims& dims) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
    os << ']';
    return os.str();
}

inline void check_dims(const Dims& dims) {
    if (dims.empty()) throw argument_error("tensor dims must be non-empty");
    for (auto d : dims)
        if (d == 0) throw argument_error("tensor extents must be >= 1, got " + dims_to_string(dims));
}

// Dense row-major float32 tensor.
class Tensor {
public:
    Tensor() : dims_{1}, data_(1, 0.0f) {}

    explicit Tensor(Dims dims, float fill = 0.0f) : dims_(std::move(dims)) {
        check_dims(dims_);
        data_.assign(dims_product(dims_), fill);
    }

    Tensor(Dims dims, std::vector<float> data) : dims_(std::move(dims)), data_(std::move(data)) {
        check_dims(dims_);
        if (dims_product(dims_) != data_.size())
            throw argument_error("tensor data length " + std::to_string(data_.size()) +
                                 " does not match dims " + dims_to_string(dims_));
    }

    const Dims& dims() const noexcept { return dims_; }
    std::size_t rank() const noexcept { return dims_.size(); }
    std::size_t dim(std::size_t i) const { return dims_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }
    std::vector<float>& values() noexcept { return data_; }
    const std::vector<float>& values() const noexcept { return data_; }

    float& operator[](std::size_t i) noexcept { return data_[i]; }
    float operator[](std::size_t i) const noexcept { return data_[i]; }

    // [C,H,W] accessors.
    float& at(std::size_t c, std::size_t y, std::size_t x) {
        return data_[(c * dims_[1] + y) * dims_[2] + x];
    }
    float at(std::size_t c, std::size_t y, std::size_t x) const {
        return data_[(c * dims_[1] + y) * dims_[2] + x];
    }

    Tensor reshaped(Dims dims) const& { return Tensor(std::move(dims), data_); }
    Tensor reshaped(Dims dims) && { return Tensor(std::move(dims), std::move(data_)); }

    void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

    bool operator==(const Tensor&) const = default;

private:
    Dims dims_;
    std::vector<float> data_;
};

inline float max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.dims() != b.dims()) throw argument_error("max_abs_diff: dims differ");
    float m = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace oodrt::nn
