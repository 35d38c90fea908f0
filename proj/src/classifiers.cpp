#include "momentlab/classifiers.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

namespace momentlab {

namespace {

double centered_bias(const VecXd& w, const ClassStats& stats) {
  return -w.dot(stats.pooled_mean) / std::sqrt(double(w.size()));
}

VecXd solve_within(const ClassStats& stats, const VecXd& rhs, const char* what) {
  Eigen::LLT<MatXd> llt(stats.within_class_covariance);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(std::string(what) + ": within-class covariance is not positive definite");
  return llt.solve(rhs);
}

}  // namespace

double alignment(const VecXd& a, const VecXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na < 1e-300 || nb < 1e-300) throw std::invalid_argument("alignment of a zero vector");
  const double c = a.dot(b) / (na * nb);
  return std::acos(std::min(1.0, std::max(-1.0, c)));
}

Evaluation evaluate(const LinearClassifier& c, const LabeledDataset& data, Activation act) {
  check_dataset(data, "evaluate");
  if (c.w.size() != data.dim()) throw std::invalid_argument("evaluate: classifier dimension mismatch");
  const VecXd lambda =
      (data.inputs * c.w / std::sqrt(double(data.dim()))).array() + c.bias;
  Index hits = 0;
  double loss = 0.0;
  for (Index r = 0; r < data.size(); ++r) {
    const int pred = lambda[r] >= 0.0 ? 1 : -1;
    hits += pred == data.labels[r];
    const double e = activation_value(act, lambda[r]) - double(data.labels[r]);
    loss += e * e;
  }
  return {double(hits) / double(data.size()), loss / double(data.size())};
}

LinearClassifier naive_classifier(const ClassStats& stats) {
  const double n = stats.mean_difference.norm();
  if (n < 1e-12)
    throw std::runtime_error("naive_classifier: class means coincide, direction undefined");
  LinearClassifier c;
  c.w = stats.mean_difference / n;
  c.bias = centered_bias(c.w, stats);
  return c;
}

LinearClassifier linear_discriminant(const ClassStats& stats) {
  const VecXd raw = solve_within(stats, stats.mean_difference, "linear_discriminant");
  const double n = raw.norm();
  if (n < 1e-12) throw std::runtime_error("linear_discriminant: direction degenerate");
  LinearClassifier c;
  c.w = raw / n;
  c.bias = centered_bias(c.w, stats);
  return c;
}

LinearClassifier oracle_classifier(Index dim, Index axis) {
  if (axis < 0 || axis >= dim) throw std::invalid_argument("oracle_classifier: axis out of range");
  LinearClassifier c;
  c.w = VecXd::Zero(dim);
  c.w[axis] = 1.0;
  return c;
}

CorrectionResult correction_classifier(const LabeledDataset& data, const ClassStats& stats,
                                       const LinearClassifier& base, FourthOrderStat stat,
                                       double c3) {
  if (base.w.size() != stats.dim())
    throw std::invalid_argument("correction_classifier: base dimension mismatch");
  const VecXd v = base.w.normalized();

  CorrectionResult out;
  out.contraction = contract_fourth_order(data, stats, v, stat);

  const double sigma_bar2 = stats.within_class_covariance.trace() / (2.0 * double(stats.dim()));
  if (!(sigma_bar2 > 0.0))
    throw std::runtime_error("correction_classifier: degenerate within-class scale");
  out.correction = -solve_within(stats, out.contraction, "correction_classifier") / sigma_bar2;

  VecXd w = v + c3 * out.correction;
  const double n = w.norm();
  if (n < 1e-12) throw std::runtime_error("correction_classifier: corrected direction degenerate");
  out.classifier.w = w / n;
  out.classifier.bias = centered_bias(out.classifier.w, stats);
  return out;
}

}  // namespace momentlab
