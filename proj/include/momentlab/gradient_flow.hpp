#pragma once

// Truncated gradient-flow dynamics for a single unit y_hat = sigma(w.x/sqrt(D))
// under square loss on centered two-class data. Expanding sigma around zero
// and keeping powers of lambda up to K turns the exact gradient into
//   dw/dt = (2/sqrt(D)) sum_{k<=K} ( beta~_{k+1} E[y lambda^k x] - gamma_k E[lambda^k x] )
// which only touches input statistics of order K+1 and below. The faithful
// odd-activation truncation at K=3 has an anti-damped cubic term (gamma_3 < 0
// for any odd saturating sigma), so it admits no fixed point and eventually
// runs away; the practical order-3 flow freezes the constants instead:
//   dw/dt = (2/sqrt(D)) ( c1 mu - c2 Sigma_w W - c3 u_w(W) ),  W = w/sqrt(D),
// with mu the class-mean offset, Sigma_w the per-class average covariance and
// u_w the per-class average fourth-cumulant contraction. Small positive c3
// keeps a stable fixed point tilted toward the non-Gaussian axis.

#include <functional>
#include <memory>
#include <set>
#include <stdexcept>
#include <vector>

#include "momentlab/activation.hpp"
#include "momentlab/class_stats.hpp"
#include "momentlab/classifiers.hpp"
#include "momentlab/dataset.hpp"
#include "momentlab/rectangular.hpp"
#include "momentlab/types.hpp"

namespace momentlab {

// Everything the dynamics needs from the data distribution. Implementations
// work in pooled-centered coordinates.
class GFSource {
 public:
  virtual ~GFSource() = default;
  virtual Index dim() const = 0;

  // s[k] = E[lambda^k x], t[k] = E[y lambda^k x] for k = 0..K with
  // lambda = w.x/sqrt(D).
  virtual void expectations(const VecXd& w, int K, std::vector<VecXd>& s,
                            std::vector<VecXd>& t) const = 0;

  virtual VecXd class_mean_offset() const = 0;      // mu = (mean difference)/2
  virtual MatXd pooled_second_moment() const = 0;   // kappa = Sigma_w/2 + mu mu^T on balance
  virtual MatXd average_within_covariance() const = 0;  // Sigma_w = within/2
  // per-class average fourth-cumulant contraction u(v)/2
  virtual VecXd average_within_fourth_contraction(const VecXd& v) const = 0;
};

class AnalyticRectangularSource final : public GFSource {
 public:
  explicit AnalyticRectangularSource(const RectangularParams& p);
  Index dim() const override { return p_.dim; }
  void expectations(const VecXd& w, int K, std::vector<VecXd>& s,
                    std::vector<VecXd>& t) const override;
  VecXd class_mean_offset() const override;
  MatXd pooled_second_moment() const override;
  MatXd average_within_covariance() const override;
  VecXd average_within_fourth_contraction(const VecXd& v) const override;

 private:
  RectangularParams p_;
  RectangularAnalytic an_;
};

// Frozen-sample estimates; the dataset is centered once at construction.
class FrozenSampleSource final : public GFSource {
 public:
  explicit FrozenSampleSource(const LabeledDataset& data);
  Index dim() const override { return x_.cols(); }
  void expectations(const VecXd& w, int K, std::vector<VecXd>& s,
                    std::vector<VecXd>& t) const override;
  VecXd class_mean_offset() const override;
  MatXd pooled_second_moment() const override;
  MatXd average_within_covariance() const override;
  VecXd average_within_fourth_contraction(const VecXd& v) const override;

 private:
  LabeledDataset centered_;
  ClassStats stats_;
  MatXd x_;  // alias of centered_.inputs
  VecXd y_;
};

enum class FlowKind { activation_truncation, fixed_cubic };

struct FlowConstants {
  double c1 = 1.0;
  double c2 = 1.0;
  double c3 = 0.02;
};

struct GFConfig {
  int order = 1;  // K, 0..3 for the activation truncation; fixed_cubic is order 3
  FlowKind kind = FlowKind::activation_truncation;
  Activation activation = Activation::tanh_sigmoid;
  FlowConstants constants;  // fixed_cubic only
  double eta = 0.01;
  Index steps = 10000;
  VecXd w0;                       // empty = start at zero
  double divergence_norm = 1e8;   // guard on |w|
  Index checkpoints_per_decade = 50;
};

struct DivergenceError : std::runtime_error {
  DivergenceError(Index step_, double norm_);
  Index step;
  double norm;
};

VecXd gf_rhs(const GFSource& src, const ActivationExpansion& exp, const VecXd& w, int order);
VecXd gf_rhs_fixed_cubic(const GFSource& src, const FlowConstants& c, const VecXd& w);

struct GFReferences {
  VecXd naive, lda, corrected, oracle;
};

struct TrajectoryRow {
  Index step;
  double t, norm_w;
  double theta_naive, theta_lda, theta_corr, theta_oracle;
  double accuracy, loss;
};

// metrics callback: w -> (accuracy, loss) on whatever evaluation the caller wants
using EvalFn = std::function<Evaluation(const VecXd& w)>;

// log-spaced checkpoints (per_decade points per decade) plus 0 and the last
// step; shared by the integrator and the trainers
std::set<Index> checkpoint_schedule(Index steps, Index per_decade);

struct GFResult {
  std::vector<TrajectoryRow> rows;
  VecXd w_final;
};

// Forward Euler with log-spaced checkpoints (plus step 0 and the last step).
// Throws DivergenceError when |w| crosses the guard.
GFResult integrate_gf(const GFSource& src, const GFConfig& cfg, const GFReferences& refs,
                      const EvalFn& eval_fn);

struct SteadyState {
  VecXd w;
  LinearClassifier classifier;  // normalized direction, zero bias
};

// Fixed points of the two flows that have one: the K=1 truncation
// (gamma_1 kappa W = beta~_1 mu) and the fixed-constants cubic flow
// (c2 Sigma_w W + c3 u_w(W) = c1 mu, solved by damped iteration).
// order must be 1 or 3; throws if the iteration fails to settle.
SteadyState steady_state(int order, const GFSource& src, const ActivationExpansion& exp,
                         const FlowConstants& constants = {});

}  // namespace momentlab
