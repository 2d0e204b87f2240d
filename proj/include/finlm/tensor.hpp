#pragma once

// Eigen aliases and the flat tensor-view registry used by the optimizer,
// checkpoint serialization, and gradient checking.

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "finlm/util.hpp"

namespace finlm::model {

template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using MatF = MatX<float>;
using VecF = VecX<float>;

// Flat view over one named parameter tensor; `decay` marks tensors subject
// to weight decay (weights and embeddings, not biases or layer-norm terms).
template <class S>
struct TensorView {
    std::string name;
    S* data = nullptr;
    std::ptrdiff_t size = 0;
    std::ptrdiff_t rows = 0;
    std::ptrdiff_t cols = 0;
    bool decay = false;
};

template <class S>
TensorView<S> view_of(const std::string& name, MatX<S>& m, bool decay) {
    return {name, m.data(), m.size(), m.rows(), m.cols(), decay};
}

template <class S>
TensorView<S> view_of(const std::string& name, VecX<S>& v, bool decay) {
    return {name, v.data(), v.size(), v.size(), 1, decay};
}

}  // namespace finlm::model
