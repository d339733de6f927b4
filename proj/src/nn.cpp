#include "polyvox/nn.hpp"

#include <cmath>

namespace polyvox::nn {

using ag::Var;

ag::Var ParamSet::create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                         Init init) {
  if (by_name_.count(name)) throw ConfigError("duplicate parameter: " + name);
  Matrix m(rows, cols);
  Rng rng(hash_combine(seed_, hash_string(name)));
  switch (init) {
    case Init::zeros:
      m.setZero();
      break;
    case Init::ones:
      m.setOnes();
      break;
    case Init::xavier: {
      double limit = std::sqrt(6.0 / double(rows + cols));
      for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-limit, limit);
      break;
    }
    case Init::gaussian: {
      double sd = 1.0 / std::sqrt(double(std::max<Eigen::Index>(cols, 1)));
      for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.gaussian() * sd;
      break;
    }
  }
  Var v(std::move(m), /*requires_grad=*/true);
  order_.push_back(name);
  by_name_.emplace(name, v);
  return v;
}

ag::Var ParamSet::get(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

void ParamSet::zero_grads() {
  for (auto& [name, v] : by_name_) v.node()->grad.resize(0, 0);
}

void ParamSet::load_value(const std::string& name, Matrix value) {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ConfigError("unknown parameter: " + name);
  it->second.node()->value = std::move(value);
  it->second.node()->grad.resize(0, 0);
}

void ParamSet::save(BinaryWriter& w) const {
  w.write_u64(order_.size());
  for (const auto& name : order_) {
    w.write_string(name);
    w.write_matrix(by_name_.at(name).value());
  }
}

void ParamSet::load(BinaryReader& r) {
  uint64_t n = r.read_u64();
  for (uint64_t i = 0; i < n; ++i) {
    std::string name = r.read_string();
    Matrix m = r.read_matrix();
    load_value(name, std::move(m));
  }
}

Linear::Linear(ParamSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out)
    : W(ps.create(name + ".W", in, out, Init::xavier)),
      b(ps.create(name + ".b", 1, out, Init::zeros)) {}

Var Linear::forward(const Var& x) const { return ag::add_rowvec(ag::matmul(x, W), b); }

LayerNorm::LayerNorm(ParamSet& ps, const std::string& name, Eigen::Index dim)
    : gamma(ps.create(name + ".gamma", 1, dim, Init::ones)),
      beta(ps.create(name + ".beta", 1, dim, Init::zeros)) {}

Var LayerNorm::forward(const Var& x) const {
  return ag::add_rowvec(ag::mul_rowvec(ag::normalize_rows(x, eps), gamma), beta);
}

Conv1d::Conv1d(ParamSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out,
               int k)
    : W(ps.create(name + ".W", Eigen::Index(k) * in, out, Init::xavier)),
      b(ps.create(name + ".b", 1, out, Init::zeros)),
      kernel(k) {}

Var Conv1d::forward(const Var& x) const {
  return ag::add_rowvec(ag::matmul(ag::unfold_time(x, kernel), W), b);
}

RelSelfAttention::RelSelfAttention(ParamSet& ps, const std::string& name, Eigen::Index dim,
                                   int heads_, int window_)
    : heads(heads_),
      window(window_),
      Wq(ps.create(name + ".Wq", dim, dim, Init::xavier)),
      bq(ps.create(name + ".bq", 1, dim, Init::zeros)),
      Wk(ps.create(name + ".Wk", dim, dim, Init::xavier)),
      bk(ps.create(name + ".bk", 1, dim, Init::zeros)),
      Wv(ps.create(name + ".Wv", dim, dim, Init::xavier)),
      bv(ps.create(name + ".bv", 1, dim, Init::zeros)),
      Wo(ps.create(name + ".Wo", dim, dim, Init::xavier)),
      bo(ps.create(name + ".bo", 1, dim, Init::zeros)),
      bias_table(ps.create(name + ".rel_bias", heads_, 2 * Eigen::Index(window_) + 1,
                           Init::zeros)) {
  if (dim % heads_ != 0) throw ConfigError("attention dim not divisible by heads");
}

Var RelSelfAttention::forward(const Var& x) const {
  const Eigen::Index dim = x.cols();
  const Eigen::Index dh = dim / heads;
  const Eigen::Index L = x.rows();
  Var q = ag::add_rowvec(ag::matmul(x, Wq), bq);
  Var k = ag::add_rowvec(ag::matmul(x, Wk), bk);
  Var v = ag::add_rowvec(ag::matmul(x, Wv), bv);

  Var out;
  for (int h = 0; h < heads; ++h) {
    Var qh = ag::slice_cols(q, h * dh, dh);
    Var kh = ag::slice_cols(k, h * dh, dh);
    Var vh = ag::slice_cols(v, h * dh, dh);
    Var logits = ag::scale(ag::matmul_nt(qh, kh), 1.0 / std::sqrt(double(dh)));
    Var bias_row = ag::gather_rows(bias_table, {h});
    logits = ag::add(logits, ag::rel_bias_matrix(bias_row, L));
    Var oh = ag::matmul(ag::softmax_rows(logits), vh);
    out = h == 0 ? oh : ag::concat_cols(out, oh);
  }
  return ag::add_rowvec(ag::matmul(out, Wo), bo);
}

FeedForward::FeedForward(ParamSet& ps, const std::string& name, Eigen::Index dim,
                         Eigen::Index hidden)
    : in(ps, name + ".in", dim, hidden), out(ps, name + ".out", hidden, dim) {}

Var FeedForward::forward(const Var& x) const {
  return out.forward(ag::swish(in.forward(x)));
}

ConformerLiteBlock::ConformerLiteBlock(ParamSet& ps, const std::string& name,
                                       const ConformerBlockConfig& c)
    : cfg(c),
      ln_attn(ps, name + ".ln_attn", c.dim),
      ln_conv(ps, name + ".ln_conv", c.dim),
      ln_ffn(ps, name + ".ln_ffn", c.dim),
      ffn(ps, name + ".ffn", c.dim, c.ffn_dim),
      attn(ps, name + ".attn", c.dim, c.heads, c.rel_window),
      conv_in(ps, name + ".conv_in", c.dim, c.dim),
      conv_out(ps, name + ".conv_out", c.dim, c.dim),
      dw_kernel(ps.create(name + ".dw_kernel", c.conv_kernel, c.dim, Init::xavier)) {
  if (c.macaron) {
    ln_pre_ffn = LayerNorm(ps, name + ".ln_pre_ffn", c.dim);
    pre_ffn = FeedForward(ps, name + ".pre_ffn", c.dim, c.ffn_dim);
  }
}

Var ConformerLiteBlock::forward(const Var& x) const {
  Var h = x;
  if (cfg.macaron)
    h = ag::add(h, ag::scale(pre_ffn.forward(ln_pre_ffn.forward(h)), 0.5));
  h = ag::add(h, attn.forward(ln_attn.forward(h)));
  {
    Var c = ln_conv.forward(h);
    c = ag::swish(conv_in.forward(c));
    c = ag::swish(ag::depthwise_conv1d(c, dw_kernel));
    c = conv_out.forward(c);
    h = ag::add(h, c);
  }
  h = ag::add(h, ffn.forward(ln_ffn.forward(h)));
  return h;
}

VariancePredictor::VariancePredictor(ParamSet& ps, const std::string& name, Eigen::Index in,
                                     Eigen::Index channels, int k)
    : conv1(ps, name + ".conv1", in, channels, k),
      conv2(ps, name + ".conv2", channels, channels, k),
      ln1(ps, name + ".ln1", channels),
      ln2(ps, name + ".ln2", channels),
      out(ps, name + ".out", channels, 1) {}

Var VariancePredictor::forward(const Var& x) const {
  Var h = ln1.forward(ag::swish(conv1.forward(x)));
  h = ln2.forward(ag::swish(conv2.forward(h)));
  return out.forward(h);
}

}  // namespace polyvox::nn
