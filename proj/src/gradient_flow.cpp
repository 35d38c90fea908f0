#include "momentlab/gradient_flow.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <set>

namespace momentlab {

namespace {
double quiet_nan() { return std::numeric_limits<double>::quiet_NaN(); }
}  // namespace

AnalyticRectangularSource::AnalyticRectangularSource(const RectangularParams& p)
    : p_(p), an_(p) {}

VecXd AnalyticRectangularSource::class_mean_offset() const { return an_.class_mean(1); }
MatXd AnalyticRectangularSource::pooled_second_moment() const { return an_.pooled_second_moment(); }
MatXd AnalyticRectangularSource::average_within_covariance() const { return an_.class_covariance(); }

VecXd AnalyticRectangularSource::average_within_fourth_contraction(const VecXd& v) const {
  return an_.fourth_cumulant_diagonal().cwiseProduct(v.array().cube().matrix());
}

void AnalyticRectangularSource::expectations(const VecXd& w, int K, std::vector<VecXd>& s,
                                             std::vector<VecXd>& t) const {
  if (w.size() != p_.dim) throw std::invalid_argument("gradient flow: weight dimension mismatch");
  const VecXd W = w / std::sqrt(double(p_.dim));
  const VecXd mu = an_.class_mean(1);
  const MatXd sigma = an_.class_covariance();
  const VecXd sw = sigma * W;
  const double mw = mu.dot(W);
  const double wsw = W.dot(sw);

  s.assign(static_cast<std::size_t>(K) + 1, VecXd::Zero(p_.dim));
  t.assign(static_cast<std::size_t>(K) + 1, VecXd::Zero(p_.dim));
  t[0] = mu;
  if (K >= 1) s[1] = sw + mu * mw;
  if (K >= 2) t[2] = mu * (wsw + mw * mw) + 2.0 * sw * mw;
  if (K >= 3) {
    const VecXd q = an_.fourth_cumulant_diagonal();
    s[3] = mu * (mw * mw * mw + 3.0 * mw * wsw) + sw * (3.0 * mw * mw + 3.0 * wsw) +
           q.cwiseProduct(W.array().cube().matrix());
  }
}

FrozenSampleSource::FrozenSampleSource(const LabeledDataset& data) {
  const ClassStats raw = estimate_class_stats(data);
  centered_ = data;
  centered_.inputs.rowwise() -= raw.pooled_mean.transpose();
  stats_ = estimate_class_stats(centered_);
  x_ = centered_.inputs;
  y_ = centered_.labels.cast<double>();
}

VecXd FrozenSampleSource::class_mean_offset() const { return 0.5 * stats_.mean_difference; }
MatXd FrozenSampleSource::pooled_second_moment() const { return stats_.pooled_second_moment; }
MatXd FrozenSampleSource::average_within_covariance() const {
  return 0.5 * stats_.within_class_covariance;
}

VecXd FrozenSampleSource::average_within_fourth_contraction(const VecXd& v) const {
  return 0.5 * contract_within_class_fourth_cumulant(centered_, stats_, v);
}

void FrozenSampleSource::expectations(const VecXd& w, int K, std::vector<VecXd>& s,
                                      std::vector<VecXd>& t) const {
  if (w.size() != x_.cols()) throw std::invalid_argument("gradient flow: weight dimension mismatch");
  const double n = double(x_.rows());
  const VecXd lambda = x_ * w / std::sqrt(double(x_.cols()));

  s.assign(static_cast<std::size_t>(K) + 1, VecXd());
  t.assign(static_cast<std::size_t>(K) + 1, VecXd());
  VecXd lamk = VecXd::Ones(x_.rows());
  for (int k = 0; k <= K; ++k) {
    if (k > 0) lamk = lamk.cwiseProduct(lambda);
    s[static_cast<std::size_t>(k)] = x_.adjoint() * lamk / n;
    t[static_cast<std::size_t>(k)] = x_.adjoint() * lamk.cwiseProduct(y_) / n;
  }
}

DivergenceError::DivergenceError(Index step_, double norm_)
    : std::runtime_error("gradient flow diverged at step " + std::to_string(step_) +
                         ": |w| = " + std::to_string(norm_) + " crossed the guard"),
      step(step_),
      norm(norm_) {}

VecXd gf_rhs(const GFSource& src, const ActivationExpansion& exp, const VecXd& w, int order) {
  if (order < 0 || order > 3) throw std::invalid_argument("gf_rhs: order must be in 0..3");
  if (order > exp.max_order())
    throw std::invalid_argument("gf_rhs: expansion too short for requested order");
  std::vector<VecXd> s, t;
  src.expectations(w, order, s, t);
  VecXd rhs = VecXd::Zero(src.dim());
  for (int k = 0; k <= order; ++k)
    rhs += exp.beta_tilde(k + 1) * t[static_cast<std::size_t>(k)] -
           exp.gamma(k) * s[static_cast<std::size_t>(k)];
  return rhs * (2.0 / std::sqrt(double(src.dim())));
}

VecXd gf_rhs_fixed_cubic(const GFSource& src, const FlowConstants& c, const VecXd& w) {
  const double rd = std::sqrt(double(src.dim()));
  const VecXd W = w / rd;
  VecXd rhs = c.c1 * src.class_mean_offset() - c.c2 * (src.average_within_covariance() * W) -
              c.c3 * src.average_within_fourth_contraction(W);
  return rhs * (2.0 / rd);
}

std::set<Index> checkpoint_schedule(Index steps, Index per_decade) {
  std::set<Index> cps{0, steps};
  for (Index i = 0;; ++i) {
    const double e = double(i) / double(per_decade);
    const auto v = static_cast<Index>(std::llround(std::pow(10.0, e)));
    if (v > steps) break;
    cps.insert(v);
  }
  return cps;
}

namespace {

TrajectoryRow make_row(Index step, double eta, const VecXd& w, const GFReferences& refs,
                       const EvalFn& eval_fn) {
  TrajectoryRow row;
  row.step = step;
  row.t = double(step) * eta;
  row.norm_w = w.norm();
  const bool degenerate = row.norm_w < 1e-300;
  row.theta_naive = degenerate ? quiet_nan() : alignment(w, refs.naive);
  row.theta_lda = degenerate ? quiet_nan() : alignment(w, refs.lda);
  row.theta_corr = degenerate ? quiet_nan() : alignment(w, refs.corrected);
  row.theta_oracle = degenerate ? quiet_nan() : alignment(w, refs.oracle);
  const Evaluation e = eval_fn(w);
  row.accuracy = e.accuracy;
  row.loss = e.square_loss;
  return row;
}

}  // namespace

GFResult integrate_gf(const GFSource& src, const GFConfig& cfg, const GFReferences& refs,
                      const EvalFn& eval_fn) {
  if (cfg.steps < 1) throw std::invalid_argument("integrate_gf: steps must be positive");
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("integrate_gf: eta must be positive");
  if (cfg.kind == FlowKind::fixed_cubic && cfg.order != 3)
    throw std::invalid_argument("integrate_gf: the fixed-constants flow is the order-3 one");

  const ActivationExpansion exp = ActivationExpansion::of(cfg.activation, 4);
  VecXd w = cfg.w0.size() ? cfg.w0 : VecXd(VecXd::Zero(src.dim()));
  if (w.size() != src.dim()) throw std::invalid_argument("integrate_gf: w0 dimension mismatch");

  const auto cps = checkpoint_schedule(cfg.steps, cfg.checkpoints_per_decade);
  GFResult out;
  out.rows.reserve(cps.size());
  out.rows.push_back(make_row(0, cfg.eta, w, refs, eval_fn));

  for (Index step = 1; step <= cfg.steps; ++step) {
    const VecXd rhs = cfg.kind == FlowKind::fixed_cubic
                          ? gf_rhs_fixed_cubic(src, cfg.constants, w)
                          : gf_rhs(src, exp, w, cfg.order);
    w += cfg.eta * rhs;
    const double norm = w.norm();
    if (!std::isfinite(norm) || norm > cfg.divergence_norm) throw DivergenceError(step, norm);
    if (cps.count(step)) out.rows.push_back(make_row(step, cfg.eta, w, refs, eval_fn));
  }
  out.w_final = w;
  return out;
}

SteadyState steady_state(int order, const GFSource& src, const ActivationExpansion& exp,
                         const FlowConstants& constants) {
  const double rd = std::sqrt(double(src.dim()));
  const VecXd mu = src.class_mean_offset();
  VecXd W;

  if (order == 1) {
    Eigen::LLT<MatXd> llt(src.pooled_second_moment());
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("steady_state: pooled second moment is not positive definite");
    W = (exp.beta_tilde(1) / exp.gamma(1)) * llt.solve(mu);
  } else if (order == 3) {
    Eigen::LLT<MatXd> llt(constants.c2 * src.average_within_covariance());
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("steady_state: within-class covariance is not positive definite");
    W = llt.solve(constants.c1 * mu);
    // damped iteration on c2 Sigma W = c1 mu - c3 u(W)
    const double damping = 0.5;
    bool settled = false;
    for (int it = 0; it < 1000; ++it) {
      const VecXd next =
          llt.solve(constants.c1 * mu - constants.c3 * src.average_within_fourth_contraction(W));
      const double delta = (next - W).norm();
      W = (1.0 - damping) * W + damping * next;
      if (W.norm() > 1e6)
        throw std::runtime_error("steady_state: no stable fixed point for these constants");
      if (delta < 1e-12 * std::max(1.0, W.norm())) {
        settled = true;
        break;
      }
    }
    if (!settled) throw std::runtime_error("steady_state: fixed-point iteration did not settle");
  } else {
    throw std::invalid_argument("steady_state: only orders 1 and 3 have fixed points");
  }

  SteadyState out;
  out.w = rd * W;
  const double n = out.w.norm();
  if (n < 1e-12) throw std::runtime_error("steady_state: degenerate fixed point");
  out.classifier.w = out.w / n;
  out.classifier.bias = 0.0;
  return out;
}

}  // namespace momentlab
