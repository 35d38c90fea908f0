#include "momentlab/rectangular.hpp"

#include <cmath>
#include <stdexcept>

namespace momentlab {

namespace {

double std_normal_cdf(double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); }

double std_normal_pdf(double t) {
  return std::exp(-0.5 * t * t) / std::sqrt(2.0 * 3.14159265358979323846);
}

// integral of Phi from -inf, used for averaging Phi over an interval
double big_g(double t) { return t * std_normal_cdf(t) + std_normal_pdf(t); }

// (1/2) int_{-1}^{1} Phi(p + q u) du
double phi_box_average(double p, double q) {
  if (std::abs(q) < 1e-14) return std_normal_cdf(p);
  return (big_g(p + q) - big_g(p - q)) / (2.0 * q);
}

// (1/2) int_{-1}^{1} 1[c + beta u > 0] du
double indicator_box_average(double c, double beta) {
  if (std::abs(beta) < 1e-14) return c > 0.0 ? 1.0 : 0.0;
  const double t = -c / beta;
  const double frac = beta > 0.0 ? (1.0 - t) / 2.0 : (t + 1.0) / 2.0;
  return std::min(1.0, std::max(0.0, frac));
}

// Simpson over u1 in [-1, 1]; the integrand is smooth when the Gaussian part
// is active and piecewise linear otherwise, so a fine fixed grid reaches
// ~1e-10 either way.
template <typename F>
double simpson_box(F f) {
  constexpr int kIntervals = 200000;
  const double h = 2.0 / kIntervals;
  double acc = f(-1.0) + f(1.0);
  for (int i = 1; i < kIntervals; ++i) acc += f(-1.0 + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0 / 2.0;  // outer 1/2 averages over u1
}

}  // namespace

void check_params(const RectangularParams& p) {
  if (p.dim < 2) throw std::invalid_argument("rectangular data needs dim >= 2");
  if (!(p.a > 0.0) || !(p.b > 0.0))
    throw std::invalid_argument("rectangular half-widths must be positive");
}

namespace {
void draw_sample(const RectangularParams& p, Rng& rng, int y, VecXd& x) {
  x.resize(p.dim);
  x[0] = y * p.mu1 + rng.uniform(-p.a, p.a);
  x[1] = y * p.mu2 + rng.uniform(-p.b, p.b);
  for (Index i = 2; i < p.dim; ++i) x[i] = rng.normal();
}
}  // namespace

LabeledDataset sample_rectangular(const RectangularParams& p, Index n_per_class, uint64_t seed) {
  check_params(p);
  if (n_per_class < 1) throw std::invalid_argument("sample_rectangular: n_per_class must be positive");
  LabeledDataset d;
  d.inputs.resize(2 * n_per_class, p.dim);
  d.labels.resize(2 * n_per_class);
  const int ys[2] = {-1, 1};
  VecXd x;
  for (int c = 0; c < 2; ++c) {
    Rng rng(mix_seed(seed, static_cast<uint64_t>(c)));
    for (Index r = 0; r < n_per_class; ++r) {
      const Index row = c * n_per_class + r;
      draw_sample(p, rng, ys[c], x);
      d.inputs.row(row) = x.transpose();
      d.labels[row] = ys[c];
    }
  }
  return d;
}

RectangularStream::RectangularStream(const RectangularParams& p, uint64_t seed)
    : params_(p), rng_(mix_seed(seed, 0x73747265616dull)) {
  check_params(p);
}

void RectangularStream::next(VecXd& x, int& y) {
  y = rng_.below(2) == 0 ? -1 : 1;
  draw_sample(params_, rng_, y, x);
}

RectangularAnalytic::RectangularAnalytic(const RectangularParams& p) : p_(p) { check_params(p); }

VecXd RectangularAnalytic::class_mean(int y) const {
  VecXd m = VecXd::Zero(p_.dim);
  m[0] = y * p_.mu1;
  m[1] = y * p_.mu2;
  return m;
}

VecXd RectangularAnalytic::mean_difference() const { return class_mean(1) - class_mean(-1); }

MatXd RectangularAnalytic::class_covariance() const {
  VecXd d = VecXd::Ones(p_.dim);
  d[0] = p_.a * p_.a / 3.0;
  d[1] = p_.b * p_.b / 3.0;
  return d.asDiagonal();
}

MatXd RectangularAnalytic::within_covariance() const { return 2.0 * class_covariance(); }

MatXd RectangularAnalytic::pooled_second_moment() const {
  const VecXd mu = class_mean(1);
  return class_covariance() + mu * mu.transpose();
}

VecXd RectangularAnalytic::fourth_cumulant_diagonal() const {
  VecXd q = VecXd::Zero(p_.dim);
  q[0] = -2.0 * std::pow(p_.a, 4) / 15.0;
  q[1] = -2.0 * std::pow(p_.b, 4) / 15.0;
  return q;
}

MomentSet<double> RectangularAnalytic::pooled_moments(Index cap) const {
  const VecXd mu = class_mean(1);
  const MatXd sigma = class_covariance();
  const VecXd q = fourth_cumulant_diagonal();
  MomentSet<double> m;
  m.m1 = VecXd::Zero(p_.dim);
  m.m2 = pooled_second_moment();
  m.m3 = Sym3<double>(p_.dim, cap);
  m.m4 = outer4(mu);
  m.m4 += bracket_sum2(mu, sigma);
  m.m4 += bracket_sum(sigma);
  for (Index i = 0; i < p_.dim; ++i) m.m4(i, i, i, i) += q[i];
  return m;
}

CumulantSet<double> RectangularAnalytic::pooled_cumulants(Index cap) const {
  return cumulants_from_moments(pooled_moments(cap));
}

VecXd RectangularAnalytic::naive_direction() const { return mean_difference().normalized(); }

VecXd RectangularAnalytic::lda_direction() const {
  VecXd w = VecXd::Zero(p_.dim);
  w[0] = 3.0 * p_.mu1 / (p_.a * p_.a);
  w[1] = 3.0 * p_.mu2 / (p_.b * p_.b);
  return w.normalized();
}

VecXd RectangularAnalytic::oracle_direction() const {
  VecXd w = VecXd::Zero(p_.dim);
  w[1] = 1.0;
  return w;
}

double RectangularAnalytic::accuracy(const VecXd& w, double bias) const {
  if (w.size() != p_.dim) throw std::invalid_argument("accuracy: direction dimension mismatch");
  const double alpha = w[0] * p_.a;
  const double beta = w[1] * p_.b;
  const double s = p_.dim > 2 ? w.tail(p_.dim - 2).norm() : 0.0;
  const double shift = bias * std::sqrt(double(p_.dim));
  const VecXd mu = class_mean(1);

  double acc = 0.0;
  for (int y : {-1, 1}) {
    const double c0 = y * w.dot(mu) + shift;
    double correct;
    if (s > 1e-14) {
      // P(score > 0); the Gaussian tail smooths the box average
      correct = simpson_box([&](double u1) { return phi_box_average((c0 + alpha * u1) / s, beta / s); });
    } else {
      correct = simpson_box([&](double u1) { return indicator_box_average(c0 + alpha * u1, beta); });
    }
    if (y == -1) correct = 1.0 - correct;  // class -1 is right when the score is negative
    acc += 0.5 * correct;
  }
  return acc;
}

}  // namespace momentlab
