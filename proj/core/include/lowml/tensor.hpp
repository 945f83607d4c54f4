#pragma once

#include <cassert>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

namespace lowml {

// Dense row-major tensor of doubles. Rank 1 or 2 everywhere in this library.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> v;

    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape) {
        Tensor t;
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        t.shape = std::move(shape);
        t.v.assign(n, 0.0);
        return t;
    }

    std::size_t size() const { return v.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    double& operator()(std::size_t i) { return v[i]; }
    double operator()(std::size_t i) const { return v[i]; }
    double& operator()(std::size_t i, std::size_t j) { return v[i * cols() + j]; }
    double operator()(std::size_t i, std::size_t j) const { return v[i * cols() + j]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

struct NamedTensor {
    std::string name;
    Tensor t;
};

// Ordered list of named parameter tensors; gradients align positionally.
using Params = std::vector<NamedTensor>;
using Grads = std::vector<Tensor>;

inline std::size_t param_count(const Params& p) {
    std::size_t n = 0;
    for (const auto& nt : p) n += nt.t.size();
    return n;
}

inline Grads zeros_like(const Params& p) {
    Grads g;
    g.reserve(p.size());
    for (const auto& nt : p) g.push_back(Tensor::zeros(nt.t.shape));
    return g;
}

}  // namespace lowml
