#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "polyvox/autodiff.hpp"

namespace polyvox::testsupport {

// Central-difference check of d(loss)/d(input) for every coordinate of every
// input. The callable rebuilds the graph from the same leaf Vars each time.
inline double max_grad_error(std::vector<ag::Var>& inputs,
                             const std::function<ag::Var()>& loss_fn, double h = 1e-6) {
  for (auto& v : inputs) v.zero_grad();
  ag::Var loss = loss_fn();
  ag::backward(loss);

  std::vector<Matrix> analytic;
  analytic.reserve(inputs.size());
  for (auto& v : inputs)
    analytic.push_back(v.has_grad() ? v.grad()
                                    : Matrix::Zero(v.rows(), v.cols()));

  double worst = 0.0;
  for (size_t vi = 0; vi < inputs.size(); ++vi) {
    Matrix& val = inputs[vi].value();
    for (Eigen::Index j = 0; j < val.cols(); ++j) {
      for (Eigen::Index i = 0; i < val.rows(); ++i) {
        double orig = val(i, j);
        val(i, j) = orig + h;
        double up = loss_fn().scalar();
        val(i, j) = orig - h;
        double down = loss_fn().scalar();
        val(i, j) = orig;
        double numeric = (up - down) / (2.0 * h);
        double a = analytic[vi](i, j);
        double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1.0});
        worst = std::max(worst, err);
      }
    }
  }
  return worst;
}

}  // namespace polyvox::testsupport
