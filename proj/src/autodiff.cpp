#include "polyvox/autodiff.hpp"

#include <cmath>
#include <limits>
#include <unordered_set>

namespace polyvox::ag {

namespace {

Var make(Matrix value, std::vector<Var> parents, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents.reserve(parents.size());
  for (auto& p : parents) {
    n->requires_grad = n->requires_grad || p.node()->requires_grad;
    n->parents.push_back(p.node());
  }
  if (n->requires_grad) n->backward_fn = std::move(fn);
  return Var(n);
}

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logsumexp2(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double logsumexp3(double a, double b, double c) { return logsumexp2(logsumexp2(a, b), c); }

}  // namespace

void backward(const Var& root) {
  Node* r = root.node().get();
  r->grad = Matrix::Ones(r->value.rows(), r->value.cols());

  // Iterative DFS over parent edges; reverse postorder is a valid
  // topological order (every consumer is processed before its inputs).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited{r};
  std::vector<std::pair<Node*, size_t>> stack{{r, 0}};
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
  }
}

Var constant(Matrix v) { return Var(std::move(v), false); }

Var add(const Var& a, const Var& b) {
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  return make(a.value() + b.value(), {a, b}, [](Node& n) {
    n.parents[0]->accumulate(n.grad);
    n.parents[1]->accumulate(n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  return make(a.value() - b.value(), {a, b}, [](Node& n) {
    n.parents[0]->accumulate(n.grad);
    n.parents[1]->accumulate(-n.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shape mismatch");
  return make(a.value().cwiseProduct(b.value()), {a, b}, [](Node& n) {
    n.parents[0]->accumulate(n.grad.cwiseProduct(n.parents[1]->value));
    n.parents[1]->accumulate(n.grad.cwiseProduct(n.parents[0]->value));
  });
}

Var scale(const Var& a, double c) {
  return make(a.value() * c, {a}, [c](Node& n) { n.parents[0]->accumulate(n.grad * c); });
}

Var matmul(const Var& a, const Var& b) {
  check_shape(a.cols() == b.rows(), "matmul: inner dims mismatch");
  return make(a.value() * b.value(), {a, b}, [](Node& n) {
    n.parents[0]->accumulate(n.grad * n.parents[1]->value.transpose());
    n.parents[1]->accumulate(n.parents[0]->value.transpose() * n.grad);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  check_shape(a.cols() == b.cols(), "matmul_nt: inner dims mismatch");
  return make(a.value() * b.value().transpose(), {a, b}, [](Node& n) {
    n.parents[0]->accumulate(n.grad * n.parents[1]->value);
    n.parents[1]->accumulate(n.grad.transpose() * n.parents[0]->value);
  });
}

Var transpose(const Var& a) {
  return make(a.value().transpose(), {a},
              [](Node& n) { n.parents[0]->accumulate(n.grad.transpose()); });
}

Var add_rowvec(const Var& a, const Var& b) {
  check_shape(b.rows() == 1 && b.cols() == a.cols(), "add_rowvec: bad row vector");
  Matrix v = a.value();
  v.rowwise() += b.value().row(0);
  return make(std::move(v), {a, b}, [](Node& n) {
    n.parents[0]->accumulate(n.grad);
    n.parents[1]->accumulate(n.grad.colwise().sum());
  });
}

Var mul_rowvec(const Var& a, const Var& b) {
  check_shape(b.rows() == 1 && b.cols() == a.cols(), "mul_rowvec: bad row vector");
  Matrix v = a.value().array().rowwise() * b.value().row(0).array();
  return make(std::move(v), {a, b}, [](Node& n) {
    n.parents[0]->accumulate(n.grad.array().rowwise() * n.parents[1]->value.row(0).array());
    n.parents[1]->accumulate(n.grad.cwiseProduct(n.parents[0]->value).colwise().sum());
  });
}

Var swish(const Var& x) {
  Matrix sig = (1.0 + (-x.value().array()).exp()).inverse();
  Matrix v = x.value().cwiseProduct(sig);
  return make(std::move(v), {x}, [sig](Node& n) {
    // d/dx x*s = s + x*s*(1-s)
    Matrix d = sig.array() * (1.0 + n.parents[0]->value.array() * (1.0 - sig.array()));
    n.parents[0]->accumulate(n.grad.cwiseProduct(d));
  });
}

Var tanh_(const Var& x) {
  Matrix v = x.value().array().tanh();
  return make(std::move(v), {x}, [](Node& n) {
    n.parents[0]->accumulate(n.grad.cwiseProduct((1.0 - n.value.array().square()).matrix()));
  });
}

Var softsign(const Var& x) {
  Matrix denom = 1.0 + x.value().array().abs();
  Matrix v = x.value().array() / denom.array();
  return make(std::move(v), {x}, [denom](Node& n) {
    n.parents[0]->accumulate((n.grad.array() / denom.array().square()).matrix());
  });
}

Var softmax_rows(const Var& x) {
  Matrix v = x.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    Eigen::ArrayXd row = v.row(i).array();
    row -= row.maxCoeff();
    row = row.exp();
    v.row(i) = row / row.sum();
  }
  return make(std::move(v), {x}, [](Node& n) {
    Matrix dx(n.value.rows(), n.value.cols());
    for (Eigen::Index i = 0; i < n.value.rows(); ++i) {
      double dot = n.grad.row(i).dot(n.value.row(i));
      dx.row(i) = (n.grad.row(i).array() - dot) * n.value.row(i).array();
    }
    n.parents[0]->accumulate(dx);
  });
}

Var log_softmax_rows(const Var& x) {
  Matrix v = x.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    Eigen::ArrayXd row = v.row(i).array();
    double m = row.maxCoeff();
    double lse = m + std::log((row - m).exp().sum());
    v.row(i) = row - lse;
  }
  return make(std::move(v), {x}, [](Node& n) {
    Matrix dx(n.value.rows(), n.value.cols());
    for (Eigen::Index i = 0; i < n.value.rows(); ++i) {
      double gsum = n.grad.row(i).sum();
      dx.row(i) = n.grad.row(i).array() - n.value.row(i).array().exp() * gsum;
    }
    n.parents[0]->accumulate(dx);
  });
}

Var normalize_rows(const Var& x, double eps) {
  const Eigen::Index C = x.cols();
  Matrix v(x.rows(), C);
  Eigen::ArrayXd inv_std(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mean = x.value().row(i).mean();
    double var = (x.value().row(i).array() - mean).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    v.row(i) = (x.value().row(i).array() - mean) * inv_std(i);
  }
  return make(std::move(v), {x}, [inv_std](Node& n) {
    Matrix dx(n.value.rows(), n.value.cols());
    for (Eigen::Index i = 0; i < n.value.rows(); ++i) {
      double gmean = n.grad.row(i).mean();
      double gxmean = n.grad.row(i).cwiseProduct(n.value.row(i)).mean();
      dx.row(i) =
          ((n.grad.row(i).array() - gmean) - n.value.row(i).array() * gxmean) * inv_std(i);
    }
    n.parents[0]->accumulate(dx);
  });
}

Var slice_cols(const Var& x, Eigen::Index start, Eigen::Index n_cols) {
  check_shape(start >= 0 && start + n_cols <= x.cols(), "slice_cols: out of range");
  return make(x.value().middleCols(start, n_cols), {x}, [start, n_cols](Node& n) {
    Matrix g = Matrix::Zero(n.parents[0]->value.rows(), n.parents[0]->value.cols());
    g.middleCols(start, n_cols) = n.grad;
    n.parents[0]->accumulate(g);
  });
}

Var concat_cols(const Var& a, const Var& b) {
  check_shape(a.rows() == b.rows(), "concat_cols: row mismatch");
  Matrix v(a.rows(), a.cols() + b.cols());
  v << a.value(), b.value();
  return make(std::move(v), {a, b}, [](Node& n) {
    Eigen::Index ca = n.parents[0]->value.cols();
    n.parents[0]->accumulate(n.grad.leftCols(ca));
    n.parents[1]->accumulate(n.grad.rightCols(n.grad.cols() - ca));
  });
}

Var gather_rows(const Var& table, const std::vector<int>& idx) {
  Matrix v(Eigen::Index(idx.size()), table.cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    check_shape(idx[i] >= 0 && idx[i] < table.rows(), "gather_rows: index out of range");
    v.row(Eigen::Index(i)) = table.value().row(idx[i]);
  }
  return make(std::move(v), {table}, [idx](Node& n) {
    Matrix g = Matrix::Zero(n.parents[0]->value.rows(), n.parents[0]->value.cols());
    for (size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += n.grad.row(Eigen::Index(i));
    n.parents[0]->accumulate(g);
  });
}

Var repeat_rows(const Var& x, const std::vector<int>& counts) {
  check_shape(Eigen::Index(counts.size()) == x.rows(), "repeat_rows: counts size mismatch");
  Eigen::Index total = 0;
  for (int c : counts) {
    check_shape(c >= 0, "repeat_rows: negative count");
    total += c;
  }
  Matrix v(total, x.cols());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (int k = 0; k < counts[size_t(i)]; ++k) v.row(r++) = x.value().row(i);
  return make(std::move(v), {x}, [counts](Node& n) {
    Matrix g = Matrix::Zero(n.parents[0]->value.rows(), n.parents[0]->value.cols());
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (int k = 0; k < counts[size_t(i)]; ++k) g.row(i) += n.grad.row(r++);
    n.parents[0]->accumulate(g);
  });
}

Var rel_bias_matrix(const Var& row, Eigen::Index L) {
  check_shape(row.rows() == 1 && row.cols() % 2 == 1, "rel_bias_matrix: row must be 1 x (2w+1)");
  const Eigen::Index w = row.cols() / 2;
  Matrix v(L, L);
  for (Eigen::Index i = 0; i < L; ++i)
    for (Eigen::Index j = 0; j < L; ++j) {
      Eigen::Index d = std::clamp(j - i, -w, w);
      v(i, j) = row.value()(0, d + w);
    }
  return make(std::move(v), {row}, [w](Node& n) {
    Matrix g = Matrix::Zero(1, 2 * w + 1);
    for (Eigen::Index i = 0; i < n.grad.rows(); ++i)
      for (Eigen::Index j = 0; j < n.grad.cols(); ++j) {
        Eigen::Index d = std::clamp(j - i, -w, w);
        g(0, d + w) += n.grad(i, j);
      }
    n.parents[0]->accumulate(g);
  });
}

Var unfold_time(const Var& x, int k) {
  check_shape(k >= 1 && k % 2 == 1, "unfold_time: kernel must be odd");
  const Eigen::Index L = x.rows(), C = x.cols(), half = k / 2;
  Matrix v = Matrix::Zero(L, k * C);
  for (Eigen::Index i = 0; i < L; ++i)
    for (int t = 0; t < k; ++t) {
      Eigen::Index src = i + t - half;
      if (src >= 0 && src < L) v.block(i, t * C, 1, C) = x.value().row(src);
    }
  return make(std::move(v), {x}, [k, half, C](Node& n) {
    Eigen::Index L = n.parents[0]->value.rows();
    Matrix g = Matrix::Zero(L, C);
    for (Eigen::Index i = 0; i < L; ++i)
      for (int t = 0; t < k; ++t) {
        Eigen::Index src = i + t - half;
        if (src >= 0 && src < L) g.row(src) += n.grad.block(i, Eigen::Index(t) * C, 1, C);
      }
    n.parents[0]->accumulate(g);
  });
}

Var depthwise_conv1d(const Var& x, const Var& w) {
  check_shape(w.rows() % 2 == 1, "depthwise_conv1d: kernel must be odd");
  check_shape(w.cols() == x.cols(), "depthwise_conv1d: channel mismatch");
  const Eigen::Index L = x.rows(), C = x.cols(), k = w.rows(), half = k / 2;
  Matrix v = Matrix::Zero(L, C);
  for (Eigen::Index i = 0; i < L; ++i)
    for (Eigen::Index t = 0; t < k; ++t) {
      Eigen::Index src = i + t - half;
      if (src >= 0 && src < L)
        v.row(i) += x.value().row(src).cwiseProduct(w.value().row(t));
    }
  return make(std::move(v), {x, w}, [k, half](Node& n) {
    const Matrix& xv = n.parents[0]->value;
    const Matrix& wv = n.parents[1]->value;
    Matrix gx = Matrix::Zero(xv.rows(), xv.cols());
    Matrix gw = Matrix::Zero(wv.rows(), wv.cols());
    for (Eigen::Index i = 0; i < xv.rows(); ++i)
      for (Eigen::Index t = 0; t < k; ++t) {
        Eigen::Index src = i + t - half;
        if (src >= 0 && src < xv.rows()) {
          gx.row(src) += n.grad.row(i).cwiseProduct(wv.row(t));
          gw.row(t) += n.grad.row(i).cwiseProduct(xv.row(src));
        }
      }
    n.parents[0]->accumulate(gx);
    n.parents[1]->accumulate(gw);
  });
}

Var sum_all(const Var& x) {
  Matrix v(1, 1);
  v(0, 0) = x.value().sum();
  return make(std::move(v), {x}, [](Node& n) {
    n.parents[0]->accumulate(Matrix::Constant(n.parents[0]->value.rows(),
                                              n.parents[0]->value.cols(), n.grad(0, 0)));
  });
}

Var mean_all(const Var& x) {
  Matrix v(1, 1);
  v(0, 0) = x.value().mean();
  return make(std::move(v), {x}, [](Node& n) {
    double s = n.grad(0, 0) / double(n.parents[0]->value.size());
    n.parents[0]->accumulate(
        Matrix::Constant(n.parents[0]->value.rows(), n.parents[0]->value.cols(), s));
  });
}

Var l1_loss(const Var& pred, const Matrix& target) {
  check_shape(pred.rows() == target.rows() && pred.cols() == target.cols(),
              "l1_loss: shape mismatch");
  Matrix diff = pred.value() - target;
  Matrix v(1, 1);
  v(0, 0) = diff.array().abs().mean();
  return make(std::move(v), {pred}, [diff](Node& n) {
    double s = n.grad(0, 0) / double(diff.size());
    n.parents[0]->accumulate((diff.array().sign() * s).matrix());
  });
}

Var mse_loss(const Var& pred, const Matrix& target) {
  check_shape(pred.rows() == target.rows() && pred.cols() == target.cols(),
              "mse_loss: shape mismatch");
  Matrix diff = pred.value() - target;
  Matrix v(1, 1);
  v(0, 0) = diff.array().square().mean();
  return make(std::move(v), {pred}, [diff](Node& n) {
    double s = 2.0 * n.grad(0, 0) / double(diff.size());
    n.parents[0]->accumulate(diff * s);
  });
}

Var masked_mse_loss(const Var& pred, const Matrix& target, const Matrix& mask) {
  check_shape(pred.rows() == target.rows() && pred.cols() == target.cols() &&
                  pred.rows() == mask.rows() && pred.cols() == mask.cols(),
              "masked_mse_loss: shape mismatch");
  Matrix diff = (pred.value() - target).cwiseProduct(mask);
  double denom = std::max(1.0, mask.sum());
  Matrix v(1, 1);
  v(0, 0) = diff.cwiseProduct(pred.value() - target).sum() / denom;
  Matrix mdiff = diff;  // mask .* (pred - target)
  return make(std::move(v), {pred}, [mdiff, denom](Node& n) {
    n.parents[0]->accumulate(mdiff * (2.0 * n.grad(0, 0) / denom));
  });
}

Var ctc_loss(const Var& logprobs, const std::vector<int>& targets, int blank) {
  const Eigen::Index T = logprobs.rows(), K = logprobs.cols();
  const Eigen::Index L = Eigen::Index(targets.size());
  check_shape(L >= 1, "ctc_loss: empty target");
  check_shape(blank >= 0 && blank < K, "ctc_loss: blank out of range");
  for (int t : targets)
    check_shape(t >= 0 && t < K && t != blank, "ctc_loss: bad target symbol");

  const Eigen::Index S = 2 * L + 1;
  auto ext = [&](Eigen::Index s) -> int {
    return (s % 2 == 0) ? blank : targets[size_t(s / 2)];
  };
  const Matrix& lp = logprobs.value();

  Matrix alpha = Matrix::Constant(T, S, kNegInf);
  alpha(0, 0) = lp(0, ext(0));
  if (S > 1) alpha(0, 1) = lp(0, ext(1));
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index s = 0; s < S; ++s) {
      double a = alpha(t - 1, s);
      double b = s >= 1 ? alpha(t - 1, s - 1) : kNegInf;
      double c = (s >= 2 && ext(s) != blank && ext(s) != ext(s - 2)) ? alpha(t - 1, s - 2)
                                                                     : kNegInf;
      alpha(t, s) = lp(t, ext(s)) + logsumexp3(a, b, c);
    }
  }
  double log_z = S > 1 ? logsumexp2(alpha(T - 1, S - 1), alpha(T - 1, S - 2))
                       : alpha(T - 1, S - 1);
  if (!std::isfinite(log_z))
    throw DataError("ctc_loss: no valid alignment (target too long for " +
                    std::to_string(T) + " frames)");

  Matrix beta = Matrix::Constant(T, S, kNegInf);
  beta(T - 1, S - 1) = lp(T - 1, ext(S - 1));
  if (S > 1) beta(T - 1, S - 2) = lp(T - 1, ext(S - 2));
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    for (Eigen::Index s = S - 1; s >= 0; --s) {
      double a = beta(t + 1, s);
      double b = s + 1 < S ? beta(t + 1, s + 1) : kNegInf;
      double c = (s + 2 < S && ext(s + 2) != blank && ext(s + 2) != ext(s))
                     ? beta(t + 1, s + 2)
                     : kNegInf;
      beta(t, s) = lp(t, ext(s)) + logsumexp3(a, b, c);
    }
  }

  // Posterior occupancy per (frame, symbol); alpha and beta both include
  // lp(t, ext(s)), so it is subtracted once.
  Matrix posterior = Matrix::Zero(T, K);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index s = 0; s < S; ++s) {
      double logp = alpha(t, s) + beta(t, s) - lp(t, ext(s)) - log_z;
      if (logp > -700.0) posterior(t, ext(s)) += std::exp(logp);
    }

  Matrix v(1, 1);
  v(0, 0) = -log_z;
  return make(std::move(v), {logprobs}, [posterior](Node& n) {
    n.parents[0]->accumulate(posterior * (-n.grad(0, 0)));
  });
}

}  // namespace polyvox::ag
