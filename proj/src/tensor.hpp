#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace mtlb {

// Dense row-major f64 tensor. Everything in the training stack is rank 1 or 2;
// a scalar is shape {1}.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> d);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double v);
    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor row(std::vector<double> v);
    static Tensor matrix(int rows, int cols, std::vector<double> v);

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int rows() const;
    int cols() const;
    bool is_scalar() const { return size() == 1; }
    double scalar_value() const;

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }
    double& operator[](size_t i) { return data[i]; }
    double operator[](size_t i) const { return data[i]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
    std::string shape_str() const;
};

std::string shape_str(const std::vector<int>& shape);

}  // namespace mtlb
