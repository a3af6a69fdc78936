#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace evodiff {

/// Philox4x32-10 block function (Salmon et al., SC'11). Pure: same counter and
/// key always give the same output block.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

enum class StreamLabel : std::uint32_t {
  kTrajectory = 1,
  kPopulation = 2,
  kDataset = 3,
  kTraining = 4,
};

/// Counter-based normal/uniform generator. Every draw is addressed by
/// (seed, label, step, index, block), so there is no hidden position: two
/// calls with the same address return the same numbers, and distinct
/// addresses map to distinct Philox counters.
class RngStream {
 public:
  RngStream(std::uint64_t seed, StreamLabel label) : seed_(seed), label_(label) {}

  std::uint64_t seed() const noexcept { return seed_; }
  StreamLabel label() const noexcept { return label_; }

  RngStream with_label(StreamLabel label) const { return {seed_, label}; }

  /// Fills `out` with standard normals drawn at counter (step, index).
  void normals(std::uint32_t step, std::uint32_t index, std::span<double> out) const;
  std::vector<double> normals(std::uint32_t step, std::uint32_t index, std::size_t n) const;

  /// Uniform doubles in [0, 1) at counter (step, index).
  void uniforms(std::uint32_t step, std::uint32_t index, std::span<double> out) const;

  /// Single 64-bit word at counter (step, index, block).
  std::uint64_t bits(std::uint32_t step, std::uint32_t index, std::uint32_t block = 0) const;

 private:
  std::array<std::uint32_t, 4> block(std::uint32_t step, std::uint32_t index,
                                     std::uint32_t b) const;

  std::uint64_t seed_;
  StreamLabel label_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Stable 64-bit FNV-1a hash, used for arm-name seeding and config hashes.
std::uint64_t fnv1a64(std::string_view bytes);

/// Deterministically derives a child seed from a parent seed and a salt.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t salt);

}  // namespace evodiff
