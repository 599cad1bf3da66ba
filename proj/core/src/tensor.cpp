#include "emev/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "emev/errors.hpp"

namespace emev {

int64_t shape_product(const std::vector<int64_t>& shape) {
    int64_t p = 1;
    for (int64_t d : shape) p *= d;
    return p;
}

std::string shape_to_string(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

Tensor::Tensor(std::vector<int64_t> s, std::vector<float> d)
    : shape(std::move(s)), data(std::move(d)) {
    for (int64_t dim : shape) {
        if (dim <= 0) throw DimensionError("tensor dimension must be positive, got shape " + shape_to_string(shape));
    }
    if (shape_product(shape) != static_cast<int64_t>(data.size())) {
        throw DimensionError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_to_string(shape));
    }
}

Tensor Tensor::zeros(std::vector<int64_t> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.data.assign(static_cast<size_t>(shape_product(t.shape)), 0.0f);
    return t;
}

Tensor Tensor::full(std::vector<int64_t> shape, float value) {
    Tensor t = zeros(std::move(shape));
    t.fill(value);
    return t;
}

void Tensor::fill(float v) { std::fill(data.begin(), data.end(), v); }

bool Tensor::all_finite() const {
    for (float v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape); }

}  // namespace emev
