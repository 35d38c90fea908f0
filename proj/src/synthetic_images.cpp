#include "momentlab/synthetic_images.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "momentlab/random.hpp"

namespace momentlab {

namespace {

constexpr Index kBasisSize = 12;
constexpr double kPixelNoise = 6.0;
constexpr double kTwoPi = 6.283185307179586;

VecXd cos_field(int fu, int fv, double phase) {
  VecXd f(kCifarPixels);
  for (Index y = 0; y < kCifarSide; ++y)
    for (Index x = 0; x < kCifarSide; ++x)
      f[y * kCifarSide + x] =
          std::cos(kTwoPi * (fu * double(x) + fv * double(y)) / double(kCifarSide) + phase);
  return f;
}

VecXd blob_field(double cx, double cy, double r) {
  VecXd f(kCifarPixels);
  for (Index y = 0; y < kCifarSide; ++y)
    for (Index x = 0; x < kCifarSide; ++x) {
      const double dx = double(x) - cx, dy = double(y) - cy;
      f[y * kCifarSide + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * r * r));
    }
  return f;
}

// twin pairs share the mean pattern (and tint); (7,8) also share the basis
constexpr int kMeanGroup[kCifarClasses] = {0, 1, 2, 2, 3, 3, 4, 5, 5, 6};
int basis_group(int cls) { return cls == 8 ? 7 : cls; }

}  // namespace

SyntheticRecipe synthetic_recipe(uint64_t seed, int cls) {
  if (cls < 0 || cls >= kCifarClasses)
    throw std::invalid_argument("synthetic_recipe: class outside 0..9");

  SyntheticRecipe r;
  Rng mr(mix_seed(seed, 0x6d65616eull, uint64_t(kMeanGroup[cls])));
  const int fx = 1 + int(mr.below(3));
  const int fy = int(mr.below(4));
  const double wave_amp = 35.0 + 10.0 * mr.uniform();
  const double cx = 8.0 + 16.0 * mr.uniform();
  const double cy = 8.0 + 16.0 * mr.uniform();
  const double radius = 3.0 + 3.0 * mr.uniform();
  const double blob_amp = (mr.below(2) ? 1.0 : -1.0) * (30.0 + 10.0 * mr.uniform());
  r.mean = VecXd::Constant(kCifarPixels, 120.0) +
           wave_amp * cos_field(fx, fy, kTwoPi * mr.uniform()) +
           blob_amp * blob_field(cx, cy, radius);
  for (double& t : r.tint) t = 0.75 + 0.25 * mr.uniform();

  Rng br(mix_seed(seed, 0x6261736973ull, uint64_t(basis_group(cls))));
  r.basis.resize(kCifarPixels, kBasisSize);
  for (Index p = 0; p < kBasisSize; ++p) {
    int bu = int(br.below(5)), bv = int(br.below(5));
    if (bu == 0 && bv == 0) bu = 1;
    r.basis.col(p) = 12.0 * std::pow(0.85, double(p)) * cos_field(bu, bv, kTwoPi * br.uniform());
  }
  // texture frequencies sit above everything else, and distinct integer
  // frequencies are exactly orthogonal on the 32 grid, so the texture's
  // non-Gaussian amplitude survives projection untouched by the other fields
  const double tau = basis_group(cls) == 7 ? 14.0 : 8.0;
  r.texture =
      tau * cos_field(5 + int(br.below(3)), 5 + int(br.below(3)), kTwoPi * br.uniform());
  r.product_texture = cls != 8;
  return r;
}

std::vector<CifarRecord> synthesize_image_records(const SyntheticImageParams& params) {
  if (params.per_class < 1)
    throw std::invalid_argument("synthesize_image_records: per_class must be positive");

  std::vector<CifarRecord> records;
  records.reserve(static_cast<std::size_t>(params.per_class) * kCifarClasses);
  VecXd z(kBasisSize), gray(kCifarPixels);
  for (int cls = 0; cls < kCifarClasses; ++cls) {
    const SyntheticRecipe recipe = synthetic_recipe(params.seed, cls);
    Rng rng(mix_seed(params.seed, 0x696d67ull, uint64_t(cls)));
    for (Index i = 0; i < params.per_class; ++i) {
      const double alpha = 0.8 + 0.4 * rng.uniform();
      for (Index p = 0; p < kBasisSize; ++p) z[p] = rng.normal();
      const double tex =
          recipe.product_texture ? rng.normal() * rng.normal() : rng.normal();
      gray = alpha * recipe.mean + recipe.basis * z + tex * recipe.texture;
      for (Index px = 0; px < kCifarPixels; ++px) gray[px] += kPixelNoise * rng.normal();

      CifarRecord rec;
      rec.label = uint8_t(cls);
      for (int ch = 0; ch < 3; ++ch)
        for (Index px = 0; px < kCifarPixels; ++px) {
          const double v = std::round(gray[px] * recipe.tint[ch]);
          rec.pixels[static_cast<std::size_t>(ch * kCifarPixels + px)] =
              uint8_t(std::clamp(v, 0.0, 255.0));
        }
      records.push_back(rec);
    }
  }
  return records;
}

}  // namespace momentlab
