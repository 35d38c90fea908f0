#pragma once

// Two-class synthetic data with closed-form statistics. Class y in {-1,+1}
// has mean y*(mu1, mu2, 0, ...); coordinate 1 is uniform of half-width a,
// coordinate 2 uniform of half-width b, the remaining coordinates are
// standard normal. Uniform coordinates carry negative excess kurtosis
// (-2/5 (2h)^4 / 16 = -2h^4/15 on the diagonal), which is what the
// fourth-order machinery feeds on.

#include "momentlab/dataset.hpp"
#include "momentlab/moments.hpp"
#include "momentlab/random.hpp"
#include "momentlab/types.hpp"

namespace momentlab {

struct RectangularParams {
  Index dim = 10;
  double a = 2.0;
  double b = 0.5;
  double mu1 = 0.5;
  double mu2 = 1.0;

  // Same family, means pulled together and the short side widened until the
  // boxes overlap; second- and fourth-order methods visibly separate here.
  static RectangularParams overlap() {
    RectangularParams p;
    p.b = 0.9;
    p.mu2 = 0.95;
    return p;
  }
};

void check_params(const RectangularParams& p);

// Balanced dataset: rows [0, n_per_class) are class -1, the rest class +1.
// Each class consumes its own seeded stream, so the draw is reproducible and
// independent of the other class's size.
LabeledDataset sample_rectangular(const RectangularParams& p, Index n_per_class, uint64_t seed);

// Online stream of (x, y) pairs for fresh-sample training.
class RectangularStream {
 public:
  RectangularStream(const RectangularParams& p, uint64_t seed);
  void next(VecXd& x, int& y);
  Index dim() const { return params_.dim; }

 private:
  RectangularParams params_;
  Rng rng_;
};

// Population quantities and exact evaluation for linear decision rules.
class RectangularAnalytic {
 public:
  explicit RectangularAnalytic(const RectangularParams& p);

  const RectangularParams& params() const { return p_; }
  VecXd class_mean(int y) const;       // raw coordinates
  VecXd mean_difference() const;       // mean(+1) - mean(-1) = 2*(mu1, mu2, 0...)
  MatXd class_covariance() const;      // diag(a^2/3, b^2/3, 1, ...)
  MatXd within_covariance() const;     // sum over the two classes
  MatXd pooled_second_moment() const;  // Sigma + mu mu^T
  VecXd fourth_cumulant_diagonal() const;  // per class, (-2a^4/15, -2b^4/15, 0...)

  // Pooled raw moments / cumulants of the (mean-zero) mixture, dense.
  MomentSet<double> pooled_moments(Index cap = kDenseTensorDimCap) const;
  CumulantSet<double> pooled_cumulants(Index cap = kDenseTensorDimCap) const;

  VecXd naive_direction() const;   // normalized mean difference
  VecXd lda_direction() const;     // normalized Sigma^{-1} m
  VecXd oracle_direction() const;  // the short uniform axis

  // Exact accuracy of sign(w.x/sqrt(D) + bias): the uniform block is
  // integrated by quadrature, the Gaussian remainder in closed form.
  // Accurate to ~1e-10, which stands in for Monte Carlo everywhere.
  double accuracy(const VecXd& w, double bias = 0.0) const;

 private:
  RectangularParams p_;
};

}  // namespace momentlab
