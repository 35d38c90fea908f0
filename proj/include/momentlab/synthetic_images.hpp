#pragma once

// Procedural ten-class image corpus in the CIFAR binary record format, for
// when the real archive is not on disk. The classes are layered so the clone
// ablations have definite structure to find or destroy:
//   - classes (2,3), (4,5), (7,8) are twin pairs sharing a mean pattern
//   - (2,3) and (4,5) differ only in their correlated-noise covariance
//   - (7,8) share mean AND covariance; they differ only in fourth order,
//     one drawing its texture amplitude as a product of two Gaussians and
//     the other as a single Gaussian of matched variance
// so an isotropic clone collapses all three pairs, a full-covariance clone
// collapses only (7,8), and the real data keeps every pair separable.
// Brightness jitter, product textures, and byte clipping give every class
// non-Gaussian tails on top of this.

#include <cstdint>
#include <vector>

#include "momentlab/cifar.hpp"
#include "momentlab/types.hpp"

namespace momentlab {

struct SyntheticImageParams {
  Index per_class = 500;
  uint64_t seed = 0;
};

// grayscale-plane description of one class, before color tinting
struct SyntheticRecipe {
  VecXd mean;            // 1024, base brightness plus wave and blob
  MatXd basis;           // 1024 x 12 correlated-noise directions, amplitudes folded in
  VecXd texture;         // 1024, amplitude-carrying texture field
  bool product_texture;  // amplitude ~ z1*z2 instead of a single Gaussian
  double tint[3];        // per-channel scale, shared within a twin pair
};

SyntheticRecipe synthetic_recipe(uint64_t seed, int cls);

// class-major record blocks; labels 0..9, per_class records each
std::vector<CifarRecord> synthesize_image_records(const SyntheticImageParams& params);

}  // namespace momentlab
