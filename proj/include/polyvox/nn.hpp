#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "polyvox/autodiff.hpp"
#include "polyvox/io.hpp"
#include "polyvox/rng.hpp"

namespace polyvox::nn {

enum class Init { zeros, ones, xavier, gaussian };

// Registry of named trainable parameters. Layers keep Vars that share the
// underlying nodes, so optimizer updates are visible everywhere.
class ParamSet {
 public:
  explicit ParamSet(uint64_t seed = 0) : seed_(seed) {}

  // Creates (or fails on duplicate name). Init is seeded by hash(seed, name)
  // so a parameter's initial value depends only on its name and shape.
  ag::Var create(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init init);

  ag::Var get(const std::string& name) const;
  bool has(const std::string& name) const { return by_name_.count(name) != 0; }
  const std::vector<std::string>& names() const { return order_; }
  size_t size() const { return order_.size(); }

  void zero_grads();

  // Replaces the value (and invalidates grads) of an existing parameter.
  void load_value(const std::string& name, Matrix value);

  void save(BinaryWriter& w) const;
  void load(BinaryReader& r);  // by name; shapes may differ (e.g. grown tables)

 private:
  uint64_t seed_;
  std::vector<std::string> order_;
  std::map<std::string, ag::Var> by_name_;
};

struct Linear {
  ag::Var W, b;
  Linear() = default;
  Linear(ParamSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out);
  ag::Var forward(const ag::Var& x) const;
};

struct LayerNorm {
  ag::Var gamma, beta;
  double eps = 1e-8;
  LayerNorm() = default;
  LayerNorm(ParamSet& ps, const std::string& name, Eigen::Index dim);
  ag::Var forward(const ag::Var& x) const;
};

// Full (non-depthwise) 1-D convolution over the sequence axis, zero padded
// to preserve length. Kernel size must be odd.
struct Conv1d {
  ag::Var W, b;  // W is (k*in) x out
  int kernel = 1;
  Conv1d() = default;
  Conv1d(ParamSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out, int k);
  ag::Var forward(const ag::Var& x) const;
};

// Self-attention with a learned relative-position bias per head:
// logits = Q K^T / sqrt(d_head) + B, B[i][j] = table[head][clip(j-i, -w, w)].
struct RelSelfAttention {
  int heads = 1;
  int window = 16;
  ag::Var Wq, bq, Wk, bk, Wv, bv, Wo, bo;
  ag::Var bias_table;  // heads x (2*window+1)
  RelSelfAttention() = default;
  RelSelfAttention(ParamSet& ps, const std::string& name, Eigen::Index dim, int heads,
                   int window);
  ag::Var forward(const ag::Var& x) const;
};

struct FeedForward {
  Linear in, out;
  FeedForward() = default;
  FeedForward(ParamSet& ps, const std::string& name, Eigen::Index dim, Eigen::Index hidden);
  ag::Var forward(const ag::Var& x) const;  // in -> swish -> out
};

struct ConformerBlockConfig {
  Eigen::Index dim = 384;
  Eigen::Index ffn_dim = 1536;
  int heads = 4;
  int conv_kernel = 7;
  int rel_window = 16;
  bool macaron = false;  // extra half-weighted feed-forward before attention
};

// Pre-norm residual block: [0.5*FFN ->] attention -> depthwise conv module -> FFN.
// Length preserving; with zero blocks a stack is the identity.
struct ConformerLiteBlock {
  ConformerBlockConfig cfg;
  LayerNorm ln_pre_ffn, ln_attn, ln_conv, ln_ffn;
  FeedForward pre_ffn, ffn;
  RelSelfAttention attn;
  Linear conv_in, conv_out;
  ag::Var dw_kernel;  // conv_kernel x dim

  ConformerLiteBlock() = default;
  ConformerLiteBlock(ParamSet& ps, const std::string& name, const ConformerBlockConfig& cfg);
  ag::Var forward(const ag::Var& x) const;
};

// Duration / pitch / energy predictor head: two convs with swish and layer
// norm, then a scalar projection per position.
struct VariancePredictor {
  Conv1d conv1, conv2;
  LayerNorm ln1, ln2;
  Linear out;
  VariancePredictor() = default;
  VariancePredictor(ParamSet& ps, const std::string& name, Eigen::Index in,
                    Eigen::Index channels, int k);
  ag::Var forward(const ag::Var& x) const;  // L x 1
};

}  // namespace polyvox::nn
