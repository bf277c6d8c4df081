#include "tensor.hpp"

#include <cmath>

#include "common.hpp"

namespace mtlb {

namespace {
int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw UsageError("negative dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
        throw UsageError("shape " + mtlb::shape_str(shape) + " does not match data length " +
                         std::to_string(data.size()));
}

Tensor Tensor::zeros(std::vector<int> shape) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor Tensor::full(std::vector<int> shape, double v) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), v));
}

Tensor Tensor::row(std::vector<double> v) {
    int n = static_cast<int>(v.size());
    return Tensor({1, n}, std::move(v));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> v) {
    return Tensor({rows, cols}, std::move(v));
}

int Tensor::rows() const {
    if (rank() == 2) return shape[0];
    if (rank() == 1) return 1;
    if (rank() == 0) return 1;
    throw UsageError("rows() on rank-" + std::to_string(rank()) + " tensor");
}

int Tensor::cols() const {
    if (rank() == 2) return shape[1];
    if (rank() == 1) return shape[0];
    if (rank() == 0) return 1;
    throw UsageError("cols() on rank-" + std::to_string(rank()) + " tensor");
}

double Tensor::scalar_value() const {
    if (!is_scalar())
        throw UsageError("scalar_value() on tensor of shape " + mtlb::shape_str(shape));
    return data[0];
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_str() const { return mtlb::shape_str(shape); }

std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

}  // namespace mtlb
