#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "srulab/errors.hpp"

namespace srulab {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

/// Dense row-major tensor of doubles. A scalar has shape {1}.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
        validate_shape();
        data_.assign(shape_size(shape_), fill);
    }

    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape();
        if (shape_size(shape_) != data_.size())
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_string(shape_));
    }

    static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }
    static Tensor vector(std::vector<double> v) {
        const auto n = v.size();
        return Tensor({n}, std::move(v));
    }
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
        return Tensor({rows, cols}, std::move(v));
    }
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r ? rows.begin()->size() : 0;
        std::vector<double> data;
        data.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw DimensionError("ragged matrix literal");
            data.insert(data.end(), row.begin(), row.end());
        }
        return Tensor({r, c}, std::move(data));
    }
    static Tensor identity(std::size_t n) {
        Tensor t({n, n});
        for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    bool empty() const { return data_.empty(); }

    /// Rows/cols view: rank-1 tensors are treated as a single row.
    std::size_t rows() const { return rank() >= 2 ? shape_[0] : 1; }
    std::size_t cols() const { return rank() >= 2 ? size() / shape_[0] : size(); }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    double item() const {
        if (data_.size() != 1) throw ContractError("item() on non-scalar tensor " + shape_string(shape_));
        return data_[0];
    }

    Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    Tensor& operator+=(const Tensor& o) {
        require_same_shape(o, "+=");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

    void require_same_shape(const Tensor& o, const char* op) const {
        if (shape_ != o.shape_)
            throw DimensionError(std::string(op) + ": shape " + shape_string(shape_) + " vs " +
                                 shape_string(o.shape_));
    }

private:
    void validate_shape() const {
        if (shape_.empty()) throw DimensionError("tensor shape must have at least one dimension");
        for (auto d : shape_)
            if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape_));
    }

    Shape shape_;
    std::vector<double> data_;
};

inline double sq_norm(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data()) s += v * v;
    return s;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    a.require_same_shape(b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace srulab
