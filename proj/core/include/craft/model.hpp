#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "craft/rng.hpp"
#include "craft/schedule.hpp"

namespace craft {

/// Fixed feed-forward architecture of the noise predictor:
/// [x_t | time-embedding | condition-embedding] -> tanh -> tanh -> linear.
struct MlpArch {
  int data_dim = 2;
  int time_dim = 8;  // sinusoidal embedding width, must be even
  int cond_dim = 4;
  int hidden1 = 32;
  int hidden2 = 32;

  int input_dim() const { return data_dim + time_dim + cond_dim; }
  std::size_t param_count() const;
  void validate() const;

  bool operator==(const MlpArch&) const = default;
};

/// Sinusoidal embedding of an integer timestep, sin/cos interleaved.
void time_embedding(int t, int dim, std::span<double> out);

/// Noise predictor with a flat parameter buffer in checkpoint order
/// (W1 row-major, b1, W2, b2, W3, b3). The architecture is immutable;
/// the output layer is bias-inclusive linear, so all-zero parameters
/// predict exactly zero.
class EpsMlp {
 public:
  explicit EpsMlp(const MlpArch& arch);

  /// Gaussian fan-in-scaled weights, zero biases.
  static EpsMlp random_init(const MlpArch& arch, RngStream rng);

  const MlpArch& arch() const { return arch_; }
  std::span<const double> params() const { return theta_; }
  std::span<double> params() { return theta_; }
  void set_params(std::span<const double> p);

  /// epsilon-hat(x_t, t, c). Deterministic; throws NumericError when an
  /// activation leaves the finite range.
  std::vector<double> predict(std::span<const double> x_t, int t,
                              std::span<const double> cond) const;

  /// Adds coeff * d/dtheta ||predict(x_t,t,cond) - target||^2 into grad and
  /// returns the squared error. grad must have param_count() entries.
  double accumulate_sq_err_grad(std::span<const double> x_t, int t,
                                std::span<const double> cond,
                                std::span<const double> target, double coeff,
                                std::span<double> grad) const;

 private:
  MlpArch arch_;
  std::vector<double> theta_;

  // flat-buffer offsets
  std::size_t w1_, b1_, w2_, b2_, w3_, b3_;
};

/// One minibatch element of the weighted denoising loss. `draw_seed`
/// identifies the per-sample stream for the (t, eps) draw.
struct BatchItem {
  std::span<const double> x0;
  std::span<const double> cond;
  double weight = 1.0;
  std::uint64_t draw_seed = 0;
};

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Monte-Carlo weighted denoising loss over a minibatch:
///   loss = mean_k weight_k ||eps_hat(x_t,t,c) - eps||^2,
/// t ~ U{1..T} and eps ~ N(0,I) drawn from each item's stream, and the exact
/// reverse-mode gradient of that same estimate.
LossGrad loss_and_grad(const EpsMlp& m, std::span<const BatchItem> batch,
                       const NoiseSchedule& s);

}  // namespace craft
