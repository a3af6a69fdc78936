#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evodiff/diffusion.hpp"

namespace evodiff {

/// Epsilon-predicting multilayer perceptron. Input is [x_t, embed(t)]; hidden
/// layers use tanh, the output layer is linear. Weights are row-major
/// (out x in) per layer.
struct MlpDenoiser {
  std::vector<int> layer_sizes;  // input width (N + embed_width), hidden..., N
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  int embed_width = 16;
  double embed_base = 1e4;
  std::string schedule_hash;

  std::size_t dim() const noexcept {
    return layer_sizes.empty() ? 0 : static_cast<std::size_t>(layer_sizes.back());
  }
  std::size_t layers() const noexcept { return weights.size(); }

  /// Throws ConfigError on inconsistent shapes or non-finite parameters.
  void validate() const;
};

/// Sinusoidal embedding: sin(t / base^(2k/width)) for the first half, cos
/// for the second.
std::vector<double> time_embedding(int t, int width, double base);

/// Glorot-uniform weights, zero biases, drawn from the training stream.
MlpDenoiser mlp_init(std::size_t dim, const std::vector<int>& hidden, std::uint64_t seed,
                     int embed_width = 16, double embed_base = 1e4);

std::vector<double> mlp_predict_eps(const MlpDenoiser& model, std::span<const double> x_t, int t);

/// Parameter-shaped gradient buffers.
struct MlpGradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static MlpGradients zeros_like(const MlpDenoiser& model);
};

/// Returns ||eps_hat - eps||^2 and adds its parameter gradient into `grads`.
double mlp_loss_and_gradient(const MlpDenoiser& model, std::span<const double> x_t, int t,
                             std::span<const double> eps, MlpGradients& grads);

struct TrainHyper {
  int epochs = 100;
  int batch = 32;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  std::vector<int> hidden = {64, 64};
  std::uint64_t seed = 0;
};

struct TrainResult {
  MlpDenoiser model;
  std::vector<double> epoch_losses;  // mean per-example loss per epoch
  double final_loss = 0.0;
};

/// Minibatch SGD with momentum on the epsilon-matching loss. Uses only the
/// training stream of `hyper.seed`. Throws NumericError on a non-finite loss.
TrainResult mlp_train(const std::vector<std::vector<double>>& dataset,
                      const NoiseSchedule& schedule, const TrainHyper& hyper);

/// Continues training an existing model (same contract as mlp_train).
TrainResult mlp_train(MlpDenoiser model, const std::vector<std::vector<double>>& dataset,
                      const NoiseSchedule& schedule, const TrainHyper& hyper);

DenoisingDistribution mlp_denoise(const MlpDenoiser& model, std::span<const double> x_t, int t,
                                  const NoiseSchedule& schedule);

class LearnedDenoiser : public Denoiser {
 public:
  LearnedDenoiser(MlpDenoiser model, NoiseSchedule schedule);

  std::size_t dim() const override { return model_.dim(); }
  const NoiseSchedule& schedule() const override { return schedule_; }
  const MlpDenoiser& model() const noexcept { return model_; }

  DenoisingDistribution denoise(std::span<const double> x_t, int t) const override;
  std::vector<double> predict_x0(std::span<const double> x_t, int t) const override;

 private:
  MlpDenoiser model_;
  NoiseSchedule schedule_;
};

}  // namespace evodiff
