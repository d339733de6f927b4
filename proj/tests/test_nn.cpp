#include <doctest.h>

#include "polyvox/nn.hpp"
#include "polyvox/optim.hpp"
#include "support/gradcheck.hpp"

using namespace polyvox;
using ag::Var;

namespace {

Matrix randm(Eigen::Index r, Eigen::Index c, uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.gaussian() * 0.5;
  return m;
}

}  // namespace

TEST_SUITE_BEGIN("nn");

TEST_CASE("parameter init is deterministic by name") {
  nn::ParamSet a(7), b(7);
  Var wa = a.create("layer.W", 4, 5, nn::Init::xavier);
  Var wb = b.create("layer.W", 4, 5, nn::Init::xavier);
  CHECK(wa.value() == wb.value());
  nn::ParamSet c(8);
  Var wc = c.create("layer.W", 4, 5, nn::Init::xavier);
  CHECK(wa.value() != wc.value());
  CHECK_THROWS_AS((void)a.create("layer.W", 4, 5, nn::Init::zeros), ConfigError);
}

TEST_CASE("conformer block: length preserving and differentiable") {
  nn::ParamSet ps(11);
  nn::ConformerBlockConfig cfg;
  cfg.dim = 12;
  cfg.ffn_dim = 24;
  cfg.heads = 2;
  cfg.conv_kernel = 3;
  cfg.rel_window = 4;
  nn::ConformerLiteBlock block(ps, "blk", cfg);

  Var x(randm(9, 12, 21), true);
  Var y = block.forward(x);
  CHECK(y.rows() == 9);
  CHECK(y.cols() == 12);

  std::vector<Var> inputs{x, block.attn.Wq, block.attn.bias_table, block.dw_kernel,
                          block.ffn.in.W, block.ln_attn.gamma};
  auto loss = [&] { return ag::mean_all(ag::mul(block.forward(x), block.forward(x))); };
  CHECK(testsupport::max_grad_error(inputs, loss, 1e-5) < 1e-4);
}

TEST_CASE("macaron variant runs and keeps shape") {
  nn::ParamSet ps(12);
  nn::ConformerBlockConfig cfg;
  cfg.dim = 8;
  cfg.ffn_dim = 16;
  cfg.heads = 2;
  cfg.conv_kernel = 3;
  cfg.rel_window = 2;
  cfg.macaron = true;
  nn::ConformerLiteBlock block(ps, "blk", cfg);
  Var x(randm(5, 8, 31), false);
  CHECK(block.forward(x).rows() == 5);
}

TEST_CASE("variance predictor produces one scalar per position") {
  nn::ParamSet ps(13);
  nn::VariancePredictor vp(ps, "dur", 10, 6, 3);
  Var x(randm(7, 10, 41), false);
  Var y = vp.forward(x);
  CHECK(y.rows() == 7);
  CHECK(y.cols() == 1);
}

TEST_CASE("adam reduces a quadratic and survives save/load byte-identically") {
  auto make = [&](nn::ParamSet& ps) {
    return ps.create("w", 3, 3, nn::Init::xavier);
  };
  Matrix target = randm(3, 3, 51);

  nn::ParamSet ps(5);
  Var w = make(ps);
  nn::AdamConfig cfg;
  cfg.lr = 0.05;
  nn::Adam opt(&ps, cfg);
  double first = (w.value() - target).squaredNorm();
  for (int i = 0; i < 200; ++i) {
    ag::Var loss = ag::mse_loss(w, target);
    ag::backward(loss);
    opt.step();
  }
  CHECK((w.value() - target).squaredNorm() < 0.01 * first);

  auto dir = std::filesystem::temp_directory_path() / "polyvox_nn_test";
  std::filesystem::create_directories(dir);

  // Save mid-run, continue two ways, compare bit-exactly.
  {
    BinaryWriter bw(dir / "state.bin");
    ps.save(bw);
    opt.save(bw);
  }
  ag::backward(ag::mse_loss(w, target));
  opt.step();
  Matrix after_direct = w.value();

  nn::ParamSet ps2(5);
  Var w2 = make(ps2);
  nn::Adam opt2(&ps2, cfg);
  {
    BinaryReader br(dir / "state.bin");
    ps2.load(br);
    opt2.load(br);
  }
  ag::backward(ag::mse_loss(w2, target));
  opt2.step();
  CHECK(w2.value() == after_direct);
}

TEST_CASE("warmup then inverse-sqrt decay peaks at warmup step") {
  nn::ParamSet ps(6);
  (void)ps.create("w", 1, 1, nn::Init::zeros);
  nn::AdamConfig cfg;
  cfg.lr = 1.0;
  cfg.warmup_steps = 100;
  nn::Adam opt(&ps, cfg);
  // current_lr reports the rate the *next* step will use
  CHECK(opt.current_lr() == doctest::Approx(0.01));
  for (int i = 0; i < 99; ++i) {
    ag::Var loss = ag::mse_loss(ps.get("w"), Matrix::Ones(1, 1));
    ag::backward(loss);
    opt.step();
  }
  CHECK(opt.current_lr() == doctest::Approx(1.0));
  for (int i = 0; i < 300; ++i) {
    ag::Var loss = ag::mse_loss(ps.get("w"), Matrix::Ones(1, 1));
    ag::backward(loss);
    opt.step();
  }
  CHECK(opt.current_lr() == doctest::Approx(0.5));
}

TEST_SUITE_END();
