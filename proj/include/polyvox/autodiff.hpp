#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "polyvox/common.hpp"

namespace polyvox::ag {

// Reverse-mode autodiff over Eigen matrices. Graphs are built dynamically;
// nodes free themselves once the last Var referencing them goes away.
// Sequence data is stored rows = positions, cols = channels.

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Matrix value;
  Matrix grad;  // empty until backward touches it
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Matrix& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(Matrix v, bool requires_grad = false) : node_(std::make_shared<Node>()) {
    node_->value = std::move(v);
    node_->requires_grad = requires_grad;
  }
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  Matrix& value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const NodePtr& node() const { return node_; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }

  // 1x1 convenience
  double scalar() const {
    check_shape(rows() == 1 && cols() == 1, "Var::scalar on non-scalar");
    return node_->value(0, 0);
  }

  void zero_grad() { node_->grad.resize(0, 0); }

 private:
  NodePtr node_;
};

// Seeds root.grad with ones and propagates through the graph in reverse
// topological order. Each node's backward_fn runs exactly once.
void backward(const Var& root);

Var constant(Matrix v);

// --- arithmetic ---
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);         // elementwise
Var scale(const Var& a, double c);
Var matmul(const Var& a, const Var& b);      // a * b
Var matmul_nt(const Var& a, const Var& b);   // a * b^T
Var transpose(const Var& a);

// b broadcast over rows of a (b is 1 x C)
Var add_rowvec(const Var& a, const Var& b);
Var mul_rowvec(const Var& a, const Var& b);

// --- nonlinearities ---
Var swish(const Var& x);                     // x * sigmoid(x)
Var tanh_(const Var& x);
Var softsign(const Var& x);                  // x / (1 + |x|)
Var softmax_rows(const Var& x);
Var log_softmax_rows(const Var& x);
// Row-wise (x - mean) / sqrt(var + eps); the pre-affine part of layer norm.
Var normalize_rows(const Var& x, double eps);

// --- structure ---
Var slice_cols(const Var& x, Eigen::Index start, Eigen::Index n);
Var concat_cols(const Var& a, const Var& b);
Var gather_rows(const Var& table, const std::vector<int>& idx);
// Repeat row i counts[i] times; rows with count 0 are dropped.
Var repeat_rows(const Var& x, const std::vector<int>& counts);
// B[i][j] = row[clip(j - i, -w, w) + w] for an L x L matrix; row is 1 x (2w+1).
Var rel_bias_matrix(const Var& row, Eigen::Index L);
// Zero-padded sliding windows along rows: out is L x (k*C), k odd.
Var unfold_time(const Var& x, int k);
Var depthwise_conv1d(const Var& x, const Var& w);  // w is k x C, k odd

// --- reductions / losses (targets and masks are plain data) ---
Var sum_all(const Var& x);
Var mean_all(const Var& x);
Var l1_loss(const Var& pred, const Matrix& target);
Var mse_loss(const Var& pred, const Matrix& target);
// sum(mask .* (pred-target)^2) / max(1, sum(mask))
Var masked_mse_loss(const Var& pred, const Matrix& target, const Matrix& mask);

// CTC negative log-likelihood. logprobs is T x K (rows log-sum-exp to 0),
// blank is a column index, targets are column indices != blank.
// Throws DataError when no valid alignment exists (target too long).
Var ctc_loss(const Var& logprobs, const std::vector<int>& targets, int blank);

}  // namespace polyvox::ag
