#pragma once

// Analytic linear decision rules built from class statistics. All of them
// score a sample as lambda = w.x/sqrt(dim) + bias and predict sign(lambda),
// with ties going to +1. Constructed weights are unit norm; the bias centers
// the boundary on the pooled mean.

#include "momentlab/activation.hpp"
#include "momentlab/class_stats.hpp"
#include "momentlab/dataset.hpp"
#include "momentlab/types.hpp"

namespace momentlab {

struct LinearClassifier {
  VecXd w;
  double bias = 0.0;

  double score(const VecXd& x) const { return w.dot(x) / std::sqrt(double(w.size())) + bias; }
  int predict(const VecXd& x) const { return score(x) >= 0.0 ? 1 : -1; }
};

// Angle in [0, pi] between directions; the cosine keeps its sign, so a rule
// anti-aligned with the reference reads as pi, not 0.
double alignment(const VecXd& a, const VecXd& b);

struct Evaluation {
  double accuracy;
  double square_loss;
};

Evaluation evaluate(const LinearClassifier& c, const LabeledDataset& data,
                    Activation act = Activation::tanh_sigmoid);

// w along the class-mean difference.
LinearClassifier naive_classifier(const ClassStats& stats);

// w along (within-class covariance)^{-1} m.
LinearClassifier linear_discriminant(const ClassStats& stats);

// The planted direction, for synthetic tasks where it is known.
LinearClassifier oracle_classifier(Index dim, Index axis = 1);

struct CorrectionResult {
  LinearClassifier classifier;
  VecXd correction;   // -kappa_w^{-1} u / sigma_bar^2, the direction added to the base
  VecXd contraction;  // u itself
};

// base + c3 * correction, renormalized. sigma_bar^2 = tr(kappa_w)/(2 dim)
// makes c3 dimensionless: rescaling the data rescales the correction and the
// base identically.
CorrectionResult correction_classifier(const LabeledDataset& data, const ClassStats& stats,
                                       const LinearClassifier& base, FourthOrderStat stat,
                                       double c3 = 0.05);

}  // namespace momentlab
