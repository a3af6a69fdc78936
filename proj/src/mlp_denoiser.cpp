#include "evodiff/mlp_denoiser.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "evodiff/error.hpp"
#include "evodiff/rng.hpp"

namespace evodiff {

void MlpDenoiser::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("mlp needs at least an input and output layer");
  if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size()) {
    throw ConfigError("mlp parameter count does not match layer_sizes");
  }
  if (embed_width < 0 || embed_width % 2 != 0) throw ConfigError("embed width must be even");
  if (layer_sizes.front() != layer_sizes.back() + embed_width) {
    throw ConfigError("mlp input width must equal output width + embed width");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto in = static_cast<std::size_t>(layer_sizes[l]);
    const auto out = static_cast<std::size_t>(layer_sizes[l + 1]);
    if (weights[l].size() != in * out || biases[l].size() != out) {
      throw ConfigError("mlp layer " + std::to_string(l) + " has wrong parameter shape");
    }
    for (double w : weights[l]) {
      if (!std::isfinite(w)) throw ConfigError("mlp has non-finite weights");
    }
    for (double b : biases[l]) {
      if (!std::isfinite(b)) throw ConfigError("mlp has non-finite biases");
    }
  }
}

std::vector<double> time_embedding(int t, int width, double base) {
  std::vector<double> out(static_cast<std::size_t>(width));
  const int half = width / 2;
  for (int k = 0; k < half; ++k) {
    const double freq = std::pow(base, -2.0 * k / width);
    out[static_cast<std::size_t>(k)] = std::sin(t * freq);
    out[static_cast<std::size_t>(k + half)] = std::cos(t * freq);
  }
  return out;
}

MlpDenoiser mlp_init(std::size_t dim, const std::vector<int>& hidden, std::uint64_t seed,
                     int embed_width, double embed_base) {
  MlpDenoiser model;
  model.embed_width = embed_width;
  model.embed_base = embed_base;
  model.layer_sizes.push_back(static_cast<int>(dim) + embed_width);
  for (int h : hidden) {
    if (h < 1) throw ConfigError("hidden layer widths must be positive");
    model.layer_sizes.push_back(h);
  }
  model.layer_sizes.push_back(static_cast<int>(dim));
  const RngStream rng(derive_seed(seed, 0x1417), StreamLabel::kTraining);
  for (std::size_t l = 0; l + 1 < model.layer_sizes.size(); ++l) {
    const auto in = static_cast<std::size_t>(model.layer_sizes[l]);
    const auto out = static_cast<std::size_t>(model.layer_sizes[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::vector<double> w(in * out);
    rng.uniforms(0, static_cast<std::uint32_t>(l), w);
    for (double& v : w) v = (2.0 * v - 1.0) * limit;
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(out, 0.0);
  }
  return model;
}

namespace {

void check_input(const MlpDenoiser& model, std::span<const double> x_t) {
  if (x_t.size() != model.dim()) throw ConfigError("mlp input dimension mismatch");
}

// Activations per layer: acts[0] is the input, acts[l] the output of layer l.
std::vector<std::vector<double>> forward(const MlpDenoiser& model, std::span<const double> x_t,
                                         int t) {
  std::vector<std::vector<double>> acts;
  acts.reserve(model.layers() + 1);
  std::vector<double> input(x_t.begin(), x_t.end());
  const auto emb = time_embedding(t, model.embed_width, model.embed_base);
  input.insert(input.end(), emb.begin(), emb.end());
  acts.push_back(std::move(input));
  for (std::size_t l = 0; l < model.layers(); ++l) {
    const auto& in = acts.back();
    const auto& w = model.weights[l];
    const auto& b = model.biases[l];
    const std::size_t n_in = in.size();
    std::vector<double> out(b);
    for (std::size_t o = 0; o < out.size(); ++o) {
      const double* row = w.data() + o * n_in;
      double acc = 0.0;
      for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * in[i];
      out[o] += acc;
    }
    if (l + 1 < model.layers()) {
      for (double& v : out) v = std::tanh(v);
    }
    acts.push_back(std::move(out));
  }
  return acts;
}

}  // namespace

std::vector<double> mlp_predict_eps(const MlpDenoiser& model, std::span<const double> x_t, int t) {
  check_input(model, x_t);
  return std::move(forward(model, x_t, t).back());
}

MlpGradients MlpGradients::zeros_like(const MlpDenoiser& model) {
  MlpGradients g;
  for (std::size_t l = 0; l < model.layers(); ++l) {
    g.weights.emplace_back(model.weights[l].size(), 0.0);
    g.biases.emplace_back(model.biases[l].size(), 0.0);
  }
  return g;
}

double mlp_loss_and_gradient(const MlpDenoiser& model, std::span<const double> x_t, int t,
                             std::span<const double> eps, MlpGradients& grads) {
  check_input(model, x_t);
  const auto acts = forward(model, x_t, t);
  const auto& pred = acts.back();
  std::vector<double> delta(pred.size());
  double loss = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double d = pred[k] - eps[k];
    loss += d * d;
    delta[k] = 2.0 * d;
  }
  for (std::size_t l = model.layers(); l-- > 0;) {
    const auto& in = acts[l];
    const std::size_t n_in = in.size();
    auto& gw = grads.weights[l];
    auto& gb = grads.biases[l];
    for (std::size_t o = 0; o < delta.size(); ++o) {
      gb[o] += delta[o];
      double* row = gw.data() + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) row[i] += delta[o] * in[i];
    }
    if (l == 0) break;
    // Back through W, then through tanh of the previous layer.
    std::vector<double> next(n_in, 0.0);
    const auto& w = model.weights[l];
    for (std::size_t o = 0; o < delta.size(); ++o) {
      const double* row = w.data() + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) next[i] += row[i] * delta[o];
    }
    for (std::size_t i = 0; i < n_in; ++i) next[i] *= 1.0 - in[i] * in[i];
    delta = std::move(next);
  }
  return loss;
}

TrainResult mlp_train(const std::vector<std::vector<double>>& dataset,
                      const NoiseSchedule& schedule, const TrainHyper& hyper) {
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  MlpDenoiser model = mlp_init(dataset.front().size(), hyper.hidden, hyper.seed);
  return mlp_train(std::move(model), dataset, schedule, hyper);
}

TrainResult mlp_train(MlpDenoiser model, const std::vector<std::vector<double>>& dataset,
                      const NoiseSchedule& schedule, const TrainHyper& hyper) {
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  const std::size_t dim = dataset.front().size();
  for (const auto& x : dataset) {
    if (x.size() != dim) throw ConfigError("training dataset has mixed dimensions");
  }
  if (model.dim() != dim) throw ConfigError("model dimension does not match dataset");
  if (hyper.epochs < 0 || hyper.batch < 1) throw ConfigError("epochs >= 0 and batch >= 1 required");
  model.schedule_hash = schedule.hash();

  const RngStream rng(derive_seed(hyper.seed, 0x7EA1), StreamLabel::kTraining);
  const std::uint32_t steps = static_cast<std::uint32_t>(schedule.steps());
  const std::size_t n = dataset.size();
  const std::size_t batch = static_cast<std::size_t>(hyper.batch);

  MlpGradients velocity = MlpGradients::zeros_like(model);
  TrainResult result;
  std::vector<std::size_t> order(n);

  // One example: t and eps from the training stream at (epoch, position).
  auto example_loss = [&](std::uint32_t epoch, std::size_t pos, std::size_t item,
                          MlpGradients& grads) {
    const int t = 1 + static_cast<int>(rng.bits(epoch, static_cast<std::uint32_t>(pos),
                                                0x80000000u) % steps);
    const std::vector<double> eps = rng.normals(epoch, static_cast<std::uint32_t>(pos), dim);
    const double abar = schedule.alpha_bar(t);
    std::vector<double> x_t(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      x_t[k] = std::sqrt(abar) * dataset[item][k] + std::sqrt(1.0 - abar) * eps[k];
    }
    return mlp_loss_and_gradient(model, x_t, t, eps, grads);
  };

  if (hyper.epochs == 0) {
    MlpGradients scratch = MlpGradients::zeros_like(model);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += example_loss(0, i, i, scratch);
    result.final_loss = total / static_cast<double>(n);
    result.model = std::move(model);
    return result;
  }

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    const auto e = static_cast<std::uint32_t>(epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = rng.bits(e, 0xFFFFFFFFu, static_cast<std::uint32_t>(i)) % i;
      std::swap(order[i - 1], order[j]);
    }
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      MlpGradients grads = MlpGradients::zeros_like(model);
      double batch_total = 0.0;
      for (std::size_t pos = start; pos < stop; ++pos) {
        batch_total += example_loss(e, pos, order[pos], grads);
      }
      if (!std::isfinite(batch_total)) {
        std::ostringstream msg;
        msg << "training diverged: non-finite loss at epoch " << epoch << ", batch starting at "
            << start << " (learning_rate " << hyper.learning_rate << ")";
        throw NumericError(msg.str());
      }
      epoch_total += batch_total;
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (std::size_t l = 0; l < model.layers(); ++l) {
        for (std::size_t k = 0; k < model.weights[l].size(); ++k) {
          auto& v = velocity.weights[l][k];
          v = hyper.momentum * v + grads.weights[l][k] * scale;
          model.weights[l][k] -= hyper.learning_rate * v;
        }
        for (std::size_t k = 0; k < model.biases[l].size(); ++k) {
          auto& v = velocity.biases[l][k];
          v = hyper.momentum * v + grads.biases[l][k] * scale;
          model.biases[l][k] -= hyper.learning_rate * v;
        }
      }
    }
    result.epoch_losses.push_back(epoch_total / static_cast<double>(n));
  }
  result.final_loss = result.epoch_losses.back();
  result.model = std::move(model);
  return result;
}

DenoisingDistribution mlp_denoise(const MlpDenoiser& model, std::span<const double> x_t, int t,
                                  const NoiseSchedule& schedule) {
  if (t < 1) throw ConfigError("mlp_denoise needs t >= 1");
  const std::vector<double> eps = mlp_predict_eps(model, x_t, t);
  const double coef = schedule.beta(t) / std::sqrt(1.0 - schedule.alpha_bar(t));
  const double inv = 1.0 / std::sqrt(schedule.alpha(t));
  DenoisingDistribution dist{std::vector<double>(x_t.size()), schedule.reverse_var(t), t};
  for (std::size_t k = 0; k < x_t.size(); ++k) dist.mean[k] = inv * (x_t[k] - coef * eps[k]);
  return dist;
}

LearnedDenoiser::LearnedDenoiser(MlpDenoiser model, NoiseSchedule schedule)
    : model_(std::move(model)), schedule_(std::move(schedule)) {
  model_.validate();
}

DenoisingDistribution LearnedDenoiser::denoise(std::span<const double> x_t, int t) const {
  return mlp_denoise(model_, x_t, t, schedule_);
}

std::vector<double> LearnedDenoiser::predict_x0(std::span<const double> x_t, int t) const {
  if (t == 0) return {x_t.begin(), x_t.end()};
  const std::vector<double> eps = mlp_predict_eps(model_, x_t, t);
  const double abar = schedule_.alpha_bar(t);
  std::vector<double> out(x_t.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = (x_t[k] - std::sqrt(1.0 - abar) * eps[k]) / std::sqrt(abar);
  }
  return out;
}

}  // namespace evodiff
