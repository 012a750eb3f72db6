#include "craft/model.hpp"

#include <cmath>
#include <string>

#include "craft/errors.hpp"

namespace craft {

namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

void MlpArch::validate() const {
  if (data_dim < 1 || cond_dim < 1 || hidden1 < 1 || hidden2 < 1) {
    throw DomainError("MlpArch: dimensions must be positive");
  }
  if (time_dim < 2 || time_dim % 2 != 0) {
    throw DomainError("MlpArch: time_dim must be even and >= 2");
  }
}

std::size_t MlpArch::param_count() const {
  const std::size_t in = static_cast<std::size_t>(input_dim());
  const std::size_t h1 = static_cast<std::size_t>(hidden1);
  const std::size_t h2 = static_cast<std::size_t>(hidden2);
  const std::size_t d = static_cast<std::size_t>(data_dim);
  return h1 * in + h1 + h2 * h1 + h2 + d * h2 + d;
}

void time_embedding(int t, int dim, std::span<double> out) {
  if (static_cast<int>(out.size()) != dim) {
    throw ContractError("time_embedding: output span size mismatch");
  }
  const int pairs = dim / 2;
  for (int i = 0; i < pairs; ++i) {
    const double omega =
        std::pow(10000.0, -2.0 * static_cast<double>(i) / dim);
    const double phase = static_cast<double>(t) * omega;
    out[static_cast<std::size_t>(2 * i)] = std::sin(phase);
    out[static_cast<std::size_t>(2 * i) + 1] = std::cos(phase);
  }
}

EpsMlp::EpsMlp(const MlpArch& arch) : arch_(arch) {
  arch_.validate();
  const std::size_t in = static_cast<std::size_t>(arch_.input_dim());
  const std::size_t h1 = static_cast<std::size_t>(arch_.hidden1);
  const std::size_t h2 = static_cast<std::size_t>(arch_.hidden2);
  const std::size_t d = static_cast<std::size_t>(arch_.data_dim);
  w1_ = 0;
  b1_ = w1_ + h1 * in;
  w2_ = b1_ + h1;
  b2_ = w2_ + h2 * h1;
  w3_ = b2_ + h2;
  b3_ = w3_ + d * h2;
  theta_.assign(arch_.param_count(), 0.0);
}

EpsMlp EpsMlp::random_init(const MlpArch& arch, RngStream rng) {
  EpsMlp m(arch);
  const int in = arch.input_dim();
  const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(arch.hidden1));
  const double s3 = 1.0 / std::sqrt(static_cast<double>(arch.hidden2));
  auto& th = m.theta_;
  std::size_t i = m.w1_;
  for (; i < m.b1_; ++i) th[i] = s1 * rng.normal();
  i = m.w2_;
  for (; i < m.b2_; ++i) th[i] = s2 * rng.normal();
  i = m.w3_;
  for (; i < m.b3_; ++i) th[i] = s3 * rng.normal();
  return m;
}

void EpsMlp::set_params(std::span<const double> p) {
  if (p.size() != theta_.size()) {
    throw ContractError("set_params: size mismatch");
  }
  theta_.assign(p.begin(), p.end());
}

std::vector<double> EpsMlp::predict(std::span<const double> x_t, int t,
                                    std::span<const double> cond) const {
  const int in_dim = arch_.input_dim();
  if (static_cast<int>(x_t.size()) != arch_.data_dim ||
      static_cast<int>(cond.size()) != arch_.cond_dim) {
    throw ContractError("predict: input dimension mismatch");
  }
  std::vector<double> in(static_cast<std::size_t>(in_dim));
  std::copy(x_t.begin(), x_t.end(), in.begin());
  time_embedding(t, arch_.time_dim,
                 std::span<double>(in).subspan(
                     static_cast<std::size_t>(arch_.data_dim),
                     static_cast<std::size_t>(arch_.time_dim)));
  std::copy(cond.begin(), cond.end(),
            in.begin() + arch_.data_dim + arch_.time_dim);

  const std::size_t h1 = static_cast<std::size_t>(arch_.hidden1);
  const std::size_t h2 = static_cast<std::size_t>(arch_.hidden2);
  const std::size_t d = static_cast<std::size_t>(arch_.data_dim);
  const std::size_t ni = static_cast<std::size_t>(in_dim);

  std::vector<double> a1(h1), a2(h2), out(d);
  for (std::size_t r = 0; r < h1; ++r) {
    double acc = theta_[b1_ + r];
    const double* w = &theta_[w1_ + r * ni];
    for (std::size_t c = 0; c < ni; ++c) acc += w[c] * in[c];
    a1[r] = std::tanh(acc);
  }
  for (std::size_t r = 0; r < h2; ++r) {
    double acc = theta_[b2_ + r];
    const double* w = &theta_[w2_ + r * h1];
    for (std::size_t c = 0; c < h1; ++c) acc += w[c] * a1[c];
    a2[r] = std::tanh(acc);
  }
  for (std::size_t r = 0; r < d; ++r) {
    double acc = theta_[b3_ + r];
    const double* w = &theta_[w3_ + r * h2];
    for (std::size_t c = 0; c < h2; ++c) acc += w[c] * a2[c];
    out[r] = acc;
  }
  if (!all_finite(out)) {
    throw NumericError("predict: non-finite activation");
  }
  return out;
}

double EpsMlp::accumulate_sq_err_grad(std::span<const double> x_t, int t,
                                      std::span<const double> cond,
                                      std::span<const double> target,
                                      double coeff,
                                      std::span<double> grad) const {
  if (grad.size() != theta_.size()) {
    throw ContractError("accumulate_sq_err_grad: grad size mismatch");
  }
  if (target.size() != static_cast<std::size_t>(arch_.data_dim)) {
    throw ContractError("accumulate_sq_err_grad: target size mismatch");
  }
  const int in_dim = arch_.input_dim();
  std::vector<double> in(static_cast<std::size_t>(in_dim));
  std::copy(x_t.begin(), x_t.end(), in.begin());
  time_embedding(t, arch_.time_dim,
                 std::span<double>(in).subspan(
                     static_cast<std::size_t>(arch_.data_dim),
                     static_cast<std::size_t>(arch_.time_dim)));
  std::copy(cond.begin(), cond.end(),
            in.begin() + arch_.data_dim + arch_.time_dim);

  const std::size_t h1 = static_cast<std::size_t>(arch_.hidden1);
  const std::size_t h2 = static_cast<std::size_t>(arch_.hidden2);
  const std::size_t d = static_cast<std::size_t>(arch_.data_dim);
  const std::size_t ni = static_cast<std::size_t>(in_dim);

  // forward, keeping activations
  std::vector<double> a1(h1), a2(h2), out(d);
  for (std::size_t r = 0; r < h1; ++r) {
    double acc = theta_[b1_ + r];
    const double* w = &theta_[w1_ + r * ni];
    for (std::size_t c = 0; c < ni; ++c) acc += w[c] * in[c];
    a1[r] = std::tanh(acc);
  }
  for (std::size_t r = 0; r < h2; ++r) {
    double acc = theta_[b2_ + r];
    const double* w = &theta_[w2_ + r * h1];
    for (std::size_t c = 0; c < h1; ++c) acc += w[c] * a1[c];
    a2[r] = std::tanh(acc);
  }
  double sq = 0.0;
  std::vector<double> de(d);  // d(sq)/d(out) scaled by coeff
  for (std::size_t r = 0; r < d; ++r) {
    double acc = theta_[b3_ + r];
    const double* w = &theta_[w3_ + r * h2];
    for (std::size_t c = 0; c < h2; ++c) acc += w[c] * a2[c];
    out[r] = acc;
    const double e = acc - target[r];
    sq += e * e;
    de[r] = 2.0 * coeff * e;
  }
  if (!std::isfinite(sq)) {
    throw NumericError("accumulate_sq_err_grad: non-finite forward pass");
  }

  // backward
  std::vector<double> da2(h2, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    double* gw = &grad[w3_ + r * h2];
    const double* w = &theta_[w3_ + r * h2];
    for (std::size_t c = 0; c < h2; ++c) {
      gw[c] += de[r] * a2[c];
      da2[c] += w[c] * de[r];
    }
    grad[b3_ + r] += de[r];
  }
  std::vector<double> da1(h1, 0.0);
  for (std::size_t r = 0; r < h2; ++r) {
    const double dz = da2[r] * (1.0 - a2[r] * a2[r]);
    double* gw = &grad[w2_ + r * h1];
    const double* w = &theta_[w2_ + r * h1];
    for (std::size_t c = 0; c < h1; ++c) {
      gw[c] += dz * a1[c];
      da1[c] += w[c] * dz;
    }
    grad[b2_ + r] += dz;
  }
  for (std::size_t r = 0; r < h1; ++r) {
    const double dz = da1[r] * (1.0 - a1[r] * a1[r]);
    double* gw = &grad[w1_ + r * ni];
    for (std::size_t c = 0; c < ni; ++c) gw[c] += dz * in[c];
    grad[b1_ + r] += dz;
  }
  return sq;
}

LossGrad loss_and_grad(const EpsMlp& m, std::span<const BatchItem> batch,
                       const NoiseSchedule& s) {
  if (batch.empty()) throw DomainError("loss_and_grad: empty minibatch");
  for (const BatchItem& it : batch) {
    if (!std::isfinite(it.weight)) {
      throw ContractError("loss_and_grad: non-finite sample weight");
    }
  }
  const int T = s.steps();
  const std::size_t d = static_cast<std::size_t>(m.arch().data_dim);
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  LossGrad lg;
  lg.grad.assign(m.arch().param_count(), 0.0);
  std::vector<double> eps(d);
  for (const BatchItem& it : batch) {
    if (it.x0.size() != d) {
      throw ContractError("loss_and_grad: x0 dimension mismatch");
    }
    RngStream rng(it.draw_seed);
    const int t = static_cast<int>(rng.uniform_int(1, T));
    rng.fill_normal(eps);
    const std::vector<double> x_t = forward_diffuse(it.x0, t, eps, s);
    const double sq = m.accumulate_sq_err_grad(x_t, t, it.cond, eps,
                                               it.weight * inv_b, lg.grad);
    lg.loss += it.weight * sq * inv_b;
  }
  if (!std::isfinite(lg.loss)) {
    throw NumericError("loss_and_grad: non-finite loss");
  }
  return lg;
}

}  // namespace craft
