#include <doctest.h>

#include <cmath>

#include "polyvox/autodiff.hpp"
#include "polyvox/rng.hpp"
#include "support/gradcheck.hpp"

using namespace polyvox;
using ag::Var;
using testsupport::max_grad_error;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, uint64_t seed, double scl = 1.0) {
  Rng rng(seed);
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.gaussian() * scl;
  return m;
}

}  // namespace

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("elementwise and matmul gradients") {
  Var a(random_matrix(3, 4, 1), true);
  Var b(random_matrix(3, 4, 2), true);
  Var w(random_matrix(4, 5, 3), true);

  std::vector<Var> inputs{a, b, w};
  auto loss = [&] {
    Var s = ag::mul(ag::add(a, b), ag::sub(a, ag::scale(b, 0.5)));
    return ag::mean_all(ag::tanh_(ag::matmul(s, w)));
  };
  CHECK(max_grad_error(inputs, loss) < 1e-7);
}

TEST_CASE("matmul_nt, transpose, rowvec broadcasts") {
  Var a(random_matrix(4, 3, 11), true);
  Var b(random_matrix(5, 3, 12), true);
  Var g(random_matrix(1, 5, 13), true);
  Var c(random_matrix(1, 5, 14), true);

  std::vector<Var> inputs{a, b, g, c};
  auto loss = [&] {
    Var m = ag::matmul_nt(a, b);  // 4 x 5
    m = ag::mul_rowvec(m, g);
    m = ag::add_rowvec(m, c);
    return ag::mean_all(ag::mul(ag::transpose(m), ag::transpose(m)));
  };
  CHECK(max_grad_error(inputs, loss) < 1e-7);
}

TEST_CASE("activations") {
  Var x(random_matrix(4, 6, 21), true);
  std::vector<Var> inputs{x};
  auto mk = [&](auto f) {
    return [&, f] { return ag::mean_all(f(x)); };
  };
  CHECK(max_grad_error(inputs, mk([](const Var& v) { return ag::swish(v); })) < 1e-7);
  CHECK(max_grad_error(inputs, mk([](const Var& v) { return ag::tanh_(v); })) < 1e-7);
  CHECK(max_grad_error(inputs, mk([](const Var& v) { return ag::softsign(v); })) < 1e-7);
}

TEST_CASE("softsign output range is open (-1, 1)") {
  Matrix big(1, 4);
  big << -1e9, -3.0, 2.0, 1e12;
  Var x(big, false);
  Matrix y = ag::softsign(x).value();
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    CHECK(y(i) > -1.0);
    CHECK(y(i) < 1.0);
  }
}

TEST_CASE("softmax and log_softmax") {
  Var x(random_matrix(5, 7, 31), true);
  Var w(random_matrix(7, 1, 32), true);
  std::vector<Var> inputs{x, w};

  auto loss_soft = [&] { return ag::mean_all(ag::matmul(ag::softmax_rows(x), w)); };
  CHECK(max_grad_error(inputs, loss_soft) < 1e-7);

  auto loss_lsm = [&] { return ag::mean_all(ag::matmul(ag::log_softmax_rows(x), w)); };
  CHECK(max_grad_error(inputs, loss_lsm) < 1e-7);

  Matrix lsm = ag::log_softmax_rows(x).value();
  for (Eigen::Index i = 0; i < lsm.rows(); ++i) {
    double lse = std::log(lsm.row(i).array().exp().sum());
    CHECK(std::abs(lse) < 1e-12);
  }
}

TEST_CASE("normalize_rows matches mean/var contract and gradient") {
  Var x(random_matrix(6, 9, 41), true);
  Var w(random_matrix(9, 1, 42), true);
  std::vector<Var> inputs{x, w};

  Matrix y = ag::normalize_rows(x, 1e-8).value();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    CHECK(std::abs(y.row(i).mean()) < 1e-10);
    double var = (y.row(i).array() - y.row(i).mean()).square().mean();
    CHECK(std::abs(var - 1.0) < 1e-6);
  }

  auto loss = [&] {
    return ag::mean_all(ag::swish(ag::matmul(ag::normalize_rows(x, 1e-8), w)));
  };
  CHECK(max_grad_error(inputs, loss) < 1e-6);
}

TEST_CASE("structure ops: slice, concat, gather, repeat, rel_bias, unfold, depthwise") {
  Var x(random_matrix(5, 6, 51), true);
  Var table(random_matrix(4, 6, 52), true);
  Var bias(random_matrix(1, 7, 53), true);
  Var kern(random_matrix(3, 6, 54), true);
  std::vector<Var> inputs{x, table, bias, kern};

  auto loss = [&] {
    Var s = ag::concat_cols(ag::slice_cols(x, 0, 3), ag::slice_cols(x, 3, 3));
    Var g = ag::gather_rows(table, {2, 0, 3, 1, 2});
    Var r = ag::repeat_rows(ag::add(s, g), {2, 0, 1, 3, 1});  // 7 rows
    Var u = ag::unfold_time(r, 3);
    Var d = ag::depthwise_conv1d(r, kern);
    Var b = ag::rel_bias_matrix(bias, 7);
    return ag::add(ag::mean_all(ag::mul(b, ag::matmul_nt(d, d))), ag::mean_all(u));
  };
  CHECK(max_grad_error(inputs, loss) < 1e-6);
}

TEST_CASE("losses") {
  Var p(random_matrix(4, 5, 61), true);
  Matrix target = random_matrix(4, 5, 62);
  Matrix mask = Matrix::Zero(4, 5);
  mask(0, 0) = mask(1, 2) = mask(3, 4) = mask(2, 2) = 1.0;
  std::vector<Var> inputs{p};

  auto l1 = [&] { return ag::l1_loss(p, target); };
  CHECK(max_grad_error(inputs, l1) < 1e-6);

  auto mse = [&] { return ag::mse_loss(p, target); };
  CHECK(max_grad_error(inputs, mse) < 1e-7);

  auto mmse = [&] { return ag::masked_mse_loss(p, target, mask); };
  CHECK(max_grad_error(inputs, mmse) < 1e-7);

  CHECK(ag::l1_loss(p, p.value()).scalar() == 0.0);
  CHECK(ag::mse_loss(p, p.value()).scalar() == 0.0);
}

TEST_CASE("masked mse ignores unmasked coordinates") {
  Var p(random_matrix(3, 3, 71), true);
  Matrix target = random_matrix(3, 3, 72);
  Matrix mask = Matrix::Ones(3, 3);
  mask(1, 1) = 0.0;
  double before = ag::masked_mse_loss(p, target, mask).scalar();
  Matrix target2 = target;
  target2(1, 1) += 100.0;
  double after = ag::masked_mse_loss(p, target2, mask).scalar();
  CHECK(before == doctest::Approx(after).epsilon(1e-15));
}

TEST_CASE("reused node accumulates gradient once per consumer") {
  Var x(random_matrix(2, 2, 81), true);
  std::vector<Var> inputs{x};
  auto loss = [&] {
    Var y = ag::mul(x, x);       // x used twice
    Var z = ag::add(y, x);       // and again
    return ag::sum_all(ag::mul(z, z));
  };
  CHECK(max_grad_error(inputs, loss) < 1e-6);
}

TEST_CASE("ctc loss gradient and values") {
  const int T = 7, K = 5;
  Var logits(random_matrix(T, K, 91), true);
  std::vector<int> targets{1, 3, 1};
  std::vector<Var> inputs{logits};

  auto loss = [&] {
    return ag::ctc_loss(ag::log_softmax_rows(logits), targets, K - 1);
  };
  CHECK(max_grad_error(inputs, loss, 1e-5) < 1e-5);

  // Perfectly peaked log-probs on a valid path (a b b) give near-zero loss.
  Matrix peaked = Matrix::Constant(3, 3, -1e4);
  peaked(0, 0) = peaked(1, 1) = peaked(2, 1) = 0.0;
  Var lp(peaked, false);
  double v = ag::ctc_loss(lp, {0, 1}, 2).scalar();
  CHECK(v < 1e-3);
}

TEST_CASE("ctc rejects impossible targets") {
  Matrix lp = Matrix::Constant(2, 3, std::log(1.0 / 3.0));
  Var v(lp, false);
  CHECK_THROWS_AS((void)ag::ctc_loss(v, {0, 0}, 2), DataError);  // needs blank between
  CHECK_THROWS_AS((void)ag::ctc_loss(v, {0, 1, 0}, 2), DataError);
}

TEST_SUITE_END();
