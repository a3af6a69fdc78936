#pragma once

#include <cstdint>
#include <vector>

#include "evodiff/gmm_denoiser.hpp"
#include "evodiff/rng.hpp"

namespace evodiff {

struct TopologySynthParams {
  int min_channels = 1;
  int max_channels = 2;
  int channel_half_width = 1;
  int blobs = 3;
  double blob_radius = 2.0;
  double smoothing = 0.15;  // weight of neighbour averaging on the final field
};

/// Channel-like W x H masks with values in [0, 1]. Every sample contains a
/// 4-connected fluid path from the left column to the right column.
std::vector<std::vector<double>> synth_topology_dataset(int n, int width, int height,
                                                        const RngStream& rng,
                                                        const TopologySynthParams& params = {});

/// True when a 4-connected fluid path joins the left and right columns.
bool has_left_right_path(const std::vector<double>& values, int width, int height);

/// Smooth random layer profiles with values in [0, 1].
std::vector<std::vector<double>> synth_stack_dataset(int n, int layers, const RngStream& rng);

/// Kernel-style mixture prior: one equally weighted component per dataset
/// entry (up to `max_components`), isotropic variance `variance`.
GaussianMixturePrior prior_from_dataset(const std::vector<std::vector<double>>& dataset,
                                        double variance, std::size_t max_components = 0);

}  // namespace evodiff
