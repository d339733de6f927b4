#include "polyvox/optim.hpp"

#include <cmath>

namespace polyvox::nn {

Adam::Adam(ParamSet* params, AdamConfig cfg) : params_(params), cfg_(cfg) { sync_shapes(); }

void Adam::sync_shapes() {
  for (const auto& name : params_->names()) {
    const Matrix& val = params_->get(name).value();
    auto fit = [&](Matrix& mm) {
      if (mm.rows() == val.rows() && mm.cols() == val.cols()) return;
      Matrix grown = Matrix::Zero(val.rows(), val.cols());
      if (mm.size() != 0 && mm.rows() <= val.rows() && mm.cols() <= val.cols())
        grown.topLeftCorner(mm.rows(), mm.cols()) = mm;
      mm = std::move(grown);
    };
    fit(m_[name]);
    fit(v_[name]);
  }
}

double Adam::lr_at(int64_t step) const {
  if (cfg_.warmup_steps <= 0) return cfg_.lr;
  double s = double(step), w = double(cfg_.warmup_steps);
  return cfg_.lr * std::min(s / w, std::sqrt(w / s));
}

void Adam::step() {
  ++t_;
  const double lr = lr_at(t_);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));

  double clip_scale = 1.0;
  if (cfg_.grad_clip > 0) {
    double sq = 0.0;
    for (const auto& name : params_->names()) {
      const auto node = params_->get(name).node();
      if (node->grad.size() != 0) sq += node->grad.squaredNorm();
    }
    double norm = std::sqrt(sq);
    if (norm > cfg_.grad_clip) clip_scale = cfg_.grad_clip / norm;
  }

  for (const auto& name : params_->names()) {
    auto node = params_->get(name).node();
    if (node->grad.size() == 0) continue;  // untouched this step
    Matrix g = node->grad * clip_scale;
    Matrix& m = m_[name];
    Matrix& v = v_[name];
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    Matrix m_hat = m / bc1;
    Matrix v_hat = v / bc2;
    node->value.array() -=
        lr * m_hat.array() / (v_hat.array().sqrt() + cfg_.eps);
  }
  params_->zero_grads();
}

void Adam::save(BinaryWriter& w) const {
  w.write_i64(t_);
  w.write_f64(cfg_.lr);
  w.write_f64(cfg_.beta1);
  w.write_f64(cfg_.beta2);
  w.write_f64(cfg_.eps);
  w.write_i64(cfg_.warmup_steps);
  w.write_f64(cfg_.grad_clip);
  w.write_u64(m_.size());
  for (const auto& [name, mat] : m_) {
    w.write_string(name);
    w.write_matrix(mat);
    w.write_matrix(v_.at(name));
  }
}

void Adam::load(BinaryReader& r) {
  t_ = r.read_i64();
  cfg_.lr = r.read_f64();
  cfg_.beta1 = r.read_f64();
  cfg_.beta2 = r.read_f64();
  cfg_.eps = r.read_f64();
  cfg_.warmup_steps = int(r.read_i64());
  cfg_.grad_clip = r.read_f64();
  uint64_t n = r.read_u64();
  m_.clear();
  v_.clear();
  for (uint64_t i = 0; i < n; ++i) {
    std::string name = r.read_string();
    m_[name] = r.read_matrix();
    v_[name] = r.read_matrix();
  }
  sync_shapes();
}

}  // namespace polyvox::nn
