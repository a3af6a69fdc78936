#include "evodiff/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>

#include "evodiff/error.hpp"

namespace evodiff {
namespace {

// Sequential reader over a block of counter-addressed uniforms.
class UniformTape {
 public:
  UniformTape(const RngStream& rng, std::uint32_t item) : rng_(rng), item_(item) {}

  double next() {
    if (pos_ == buffer_.size()) refill();
    return buffer_[pos_++];
  }

  int next_int(int lo, int hi) {  // inclusive
    const int span = hi - lo + 1;
    return lo + std::min(span - 1, static_cast<int>(next() * span));
  }

 private:
  void refill() {
    buffer_.assign(64, 0.0);
    rng_.uniforms(item_, page_++, buffer_);
    pos_ = 0;
  }

  const RngStream& rng_;
  std::uint32_t item_;
  std::uint32_t page_ = 0;
  std::vector<double> buffer_;
  std::size_t pos_ = 0;
};

}  // namespace

bool has_left_right_path(const std::vector<double>& values, int width, int height) {
  auto fluid = [&](int x, int y) {
    return std::clamp(values[static_cast<std::size_t>(y * width + x)], 0.0, 1.0) > 0.5;
  };
  std::vector<char> seen(values.size(), 0);
  std::queue<std::pair<int, int>> frontier;
  for (int y = 0; y < height; ++y) {
    if (fluid(0, y)) {
      seen[static_cast<std::size_t>(y * width)] = 1;
      frontier.emplace(0, y);
    }
  }
  constexpr int dx[] = {1, -1, 0, 0};
  constexpr int dy[] = {0, 0, 1, -1};
  while (!frontier.empty()) {
    const auto [x, y] = frontier.front();
    frontier.pop();
    if (x == width - 1) return true;
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx[k];
      const int ny = y + dy[k];
      if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
      const auto idx = static_cast<std::size_t>(ny * width + nx);
      if (seen[idx] || !fluid(nx, ny)) continue;
      seen[idx] = 1;
      frontier.emplace(nx, ny);
    }
  }
  return false;
}

std::vector<std::vector<double>> synth_topology_dataset(int n, int width, int height,
                                                        const RngStream& rng,
                                                        const TopologySynthParams& params) {
  if (n < 1) throw ConfigError("synth dataset size must be >= 1");
  if (width < 2 || height < 3) throw ConfigError("synth grid must be at least 2 x 3");
  const int hw = std::clamp(params.channel_half_width, 0, (height - 1) / 2);
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int item = 0; item < n; ++item) {
    UniformTape tape(rng, static_cast<std::uint32_t>(item));
    std::vector<double> field(static_cast<std::size_t>(width * height), 0.0);
    std::vector<char> path(field.size(), 0);
    auto mark = [&](int x, int y0, int y1) {
      for (int y = std::max(0, y0); y <= std::min(height - 1, y1); ++y) {
        field[static_cast<std::size_t>(y * width + x)] = 1.0;
      }
    };

    const int channels = tape.next_int(params.min_channels, params.max_channels);
    for (int c = 0; c < channels; ++c) {
      int y = tape.next_int(hw, height - 1 - hw);
      for (int x = 0; x < width; ++x) {
        mark(x, y - hw, y + hw);
        path[static_cast<std::size_t>(y * width + x)] = 1;
        const double u = tape.next();
        const int step = u < 0.25 ? -1 : (u > 0.75 ? 1 : 0);
        const int next = std::clamp(y + step, hw, height - 1 - hw);
        if (next != y) {
          // keep the centreline 4-connected
          mark(x, std::min(y, next) - hw, std::max(y, next) + hw);
          path[static_cast<std::size_t>(next * width + x)] = 1;
          y = next;
        }
      }
    }

    for (int b = 0; b < params.blobs; ++b) {
      const double cx = tape.next() * (width - 1);
      const double cy = tape.next() * (height - 1);
      const double r = params.blob_radius * (0.5 + tape.next());
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) {
            field[static_cast<std::size_t>(y * width + x)] = 1.0;
          }
        }
      }
    }

    if (params.smoothing > 0.0) {
      std::vector<double> smooth(field.size());
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          double acc = 0.0;
          int count = 0;
          for (auto [nx, ny] : {std::pair{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}}) {
            if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
            acc += field[static_cast<std::size_t>(ny * width + nx)];
            ++count;
          }
          const auto idx = static_cast<std::size_t>(y * width + x);
          smooth[idx] = (1.0 - params.smoothing) * field[idx] + params.smoothing * acc / count;
        }
      }
      field = std::move(smooth);
    }
    for (std::size_t i = 0; i < field.size(); ++i) {
      if (path[i]) field[i] = 1.0;
      field[i] = std::clamp(field[i], 0.0, 1.0);
    }
    out.push_back(std::move(field));
  }
  return out;
}

std::vector<std::vector<double>> synth_stack_dataset(int n, int layers, const RngStream& rng) {
  if (n < 1 || layers < 1) throw ConfigError("synth stack dataset needs n >= 1 and layers >= 1");
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int item = 0; item < n; ++item) {
    UniformTape tape(rng, static_cast<std::uint32_t>(item));
    const double offset = 0.3 + 0.4 * tape.next();
    double amp[3], phase[3];
    for (int k = 0; k < 3; ++k) {
      amp[k] = 0.25 * tape.next();
      phase[k] = 2.0 * std::numbers::pi * tape.next();
    }
    std::vector<double> v(static_cast<std::size_t>(layers));
    for (int l = 0; l < layers; ++l) {
      double value = offset;
      for (int k = 0; k < 3; ++k) {
        value += amp[k] * std::cos(2.0 * std::numbers::pi * (k + 1) * l / layers + phase[k]);
      }
      v[static_cast<std::size_t>(l)] = std::clamp(value, 0.0, 1.0);
    }
    out.push_back(std::move(v));
  }
  return out;
}

GaussianMixturePrior prior_from_dataset(const std::vector<std::vector<double>>& dataset,
                                        double variance, std::size_t max_components) {
  if (dataset.empty()) throw ConfigError("prior_from_dataset: empty dataset");
  if (!(variance > 0.0)) throw ConfigError("prior_from_dataset: variance must be > 0");
  const std::size_t k =
      max_components == 0 ? dataset.size() : std::min(max_components, dataset.size());
  GaussianMixturePrior prior;
  prior.weights.assign(k, 1.0 / static_cast<double>(k));
  for (std::size_t c = 0; c < k; ++c) {
    prior.means.push_back(dataset[c]);
    prior.variances.emplace_back(dataset[c].size(), variance);
  }
  prior.validate();
  return prior;
}

}  // namespace evodiff
