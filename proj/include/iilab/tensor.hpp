#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "iilab/common.hpp"

namespace iilab {

// Dense row-major f64 storage, rank 1..3. All extents are >= 1 and the
// element count always equals the product of the extents.
struct Shape {
    std::vector<size_t> dims;

    Shape() = default;
    Shape(std::initializer_list<size_t> d) : dims(d) { validate(); }
    explicit Shape(std::vector<size_t> d) : dims(std::move(d)) { validate(); }

    size_t rank() const { return dims.size(); }

    size_t count() const {
        size_t n = 1;
        for (size_t d : dims) n *= d;
        return n;
    }

    bool operator==(const Shape& o) const { return dims == o.dims; }
    bool operator!=(const Shape& o) const { return dims != o.dims; }

    std::string str() const {
        std::string s = "(";
        for (size_t i = 0; i < dims.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(dims[i]);
        }
        return s + ")";
    }

    void validate() const {
        if (dims.empty() || dims.size() > 3)
            throw InvalidInput("shape rank must be between 1 and 3, got " + std::to_string(dims.size()));
        for (size_t d : dims)
            if (d == 0) throw InvalidInput("shape extents must be >= 1");
    }
};

struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), data(shape.count(), 0.0) {}
    Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != shape.count())
            throw InvalidInput("tensor data length " + std::to_string(data.size()) +
                               " does not match shape " + shape.str());
    }

    static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
    static Tensor scalar(double v) { return Tensor(Shape{1}, {v}); }

    size_t count() const { return data.size(); }
    size_t rank() const { return shape.rank(); }
    size_t dim(size_t i) const { return shape.dims[i]; }

    // rank-2 accessors
    size_t rows() const { return shape.dims[0]; }
    size_t cols() const { return shape.dims[1]; }
    double& at(size_t i, size_t j) { return data[i * cols() + j]; }
    double at(size_t i, size_t j) const { return data[i * cols() + j]; }

    // rank-3 accessors
    double& at3(size_t i, size_t j, size_t k) { return data[(i * dim(1) + j) * dim(2) + k]; }
    double at3(size_t i, size_t j, size_t k) const { return data[(i * dim(1) + j) * dim(2) + k]; }

    double item() const {
        if (count() != 1) throw InvalidInput("item() requires a single-element tensor, shape is " + shape.str());
        return data[0];
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

}  // namespace iilab
