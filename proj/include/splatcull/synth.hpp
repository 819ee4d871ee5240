#pragma once

#include "splatcull/asset.hpp"

#include <cstdint>

namespace splatcull {

/// n Gaussians on a Fibonacci lattice over a sphere of `radius`, isotropic
/// std-dev `thickness`, opacity `alpha` and a smooth position-dependent colour.
/// Sampling distances are filled in for a 60 degree field of view.
Asset make_shell(int n, double radius = 1.0, double thickness = 0.04, double alpha = 0.99, std::uint64_t seed = 1);

struct SlabConfig {
  int n_front = 4096;
  int n_back = 4096;
  /// Separation along z; the front sheet sits at +gap/2 and faces +z.
  double gap = 0.5;
  double alpha_front = 0.99;
  double alpha_back = 0.99;
  /// Full side lengths of the square sheets.
  double extent_front = 1.3;
  double extent_back = 1.0;
  std::uint64_t seed = 1;
};

/// Two parallel square sheets of Gaussians on jittered grids. Front sheet
/// Gaussians come first, so index < n_front identifies the front layer.
Asset make_slab_pair(const SlabConfig& cfg);

}  // namespace splatcull
