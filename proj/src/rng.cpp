#include "evodiff/rng.hpp"

#include <cmath>
#include <numbers>

namespace evodiff {
namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(product);
  hi = static_cast<std::uint32_t>(product >> 32);
}

// 53 random bits -> [0, 1)
inline double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline std::uint64_t join(std::uint32_t lo, std::uint32_t hi) {
  return static_cast<std::uint64_t>(lo) | (static_cast<std::uint64_t>(hi) << 32);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t lo0, hi0, lo1, hi1;
    mulhilo(kPhiloxM0, ctr[0], lo0, hi0);
    mulhilo(kPhiloxM1, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

std::array<std::uint32_t, 4> RngStream::block(std::uint32_t step, std::uint32_t index,
                                               std::uint32_t b) const {
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                            static_cast<std::uint32_t>(seed_ >> 32)};
  return philox4x32({b, index, step, static_cast<std::uint32_t>(label_)}, key);
}

std::uint64_t RngStream::bits(std::uint32_t step, std::uint32_t index, std::uint32_t b) const {
  const auto out = block(step, index, b);
  return join(out[0], out[1]);
}

void RngStream::uniforms(std::uint32_t step, std::uint32_t index, std::span<double> out) const {
  for (std::size_t k = 0; k < out.size(); k += 2) {
    const auto w = block(step, index, static_cast<std::uint32_t>(k / 2));
    out[k] = to_unit(join(w[0], w[1]));
    if (k + 1 < out.size()) out[k + 1] = to_unit(join(w[2], w[3]));
  }
}

void RngStream::normals(std::uint32_t step, std::uint32_t index, std::span<double> out) const {
  // Box-Muller on two 53-bit uniforms per block; u1 is shifted into (0, 1].
  for (std::size_t k = 0; k < out.size(); k += 2) {
    const auto w = block(step, index, static_cast<std::uint32_t>(k / 2));
    const double u1 = 1.0 - to_unit(join(w[0], w[1]));
    const double u2 = to_unit(join(w[2], w[3]));
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[k] = radius * std::cos(angle);
    if (k + 1 < out.size()) out[k + 1] = radius * std::sin(angle);
  }
}

std::vector<double> RngStream::normals(std::uint32_t step, std::uint32_t index,
                                       std::size_t n) const {
  std::vector<double> out(n);
  normals(step, index, out);
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t salt) {
  return splitmix64(splitmix64(parent) ^ (salt * 0xD6E8FEB86659FD93ULL + 0x632BE59BD9B4E019ULL));
}

}  // namespace evodiff
