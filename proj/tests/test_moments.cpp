#include <doctest.h>

#include "momentlab/moments.hpp"
#include "momentlab/random.hpp"

using namespace momentlab;

namespace {

Sym3<double> random_sym3(Index d, Rng& rng) {
  Sym3<double> t(d);
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j)
      for (Index k = j; k < d; ++k) {
        const double v = rng.uniform(-1.0, 1.0);
        t(i, j, k) = t(i, k, j) = t(j, i, k) = t(j, k, i) = t(k, i, j) = t(k, j, i) = v;
      }
  return t;
}

Sym4<double> random_sym4(Index d, Rng& rng) {
  Sym4<double> t(d);
  Index idx[4];
  for (idx[0] = 0; idx[0] < d; ++idx[0])
    for (idx[1] = idx[0]; idx[1] < d; ++idx[1])
      for (idx[2] = idx[1]; idx[2] < d; ++idx[2])
        for (idx[3] = idx[2]; idx[3] < d; ++idx[3]) {
          const double v = rng.uniform(-1.0, 1.0);
          Index p[4] = {idx[0], idx[1], idx[2], idx[3]};
          std::sort(p, p + 4);
          do t(p[0], p[1], p[2], p[3]) = v;
          while (std::next_permutation(p, p + 4));
        }
  return t;
}

CumulantSet<double> random_cumulants(Index d, Rng& rng) {
  CumulantSet<double> c;
  c.k1.resize(d);
  for (Index i = 0; i < d; ++i) c.k1[i] = rng.uniform(-1.0, 1.0);
  c.k2.resize(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j) c.k2(i, j) = c.k2(j, i) = rng.uniform(-1.0, 1.0);
  c.k3 = random_sym3(d, rng);
  c.k4 = random_sym4(d, rng);
  return c;
}

double max_abs_diff(const Sym4<double>& a, const Sym4<double>& b) {
  double m = 0.0;
  for (Index i = 0; i < a.dim(); ++i)
    for (Index j = 0; j < a.dim(); ++j)
      for (Index k = 0; k < a.dim(); ++k)
        for (Index l = 0; l < a.dim(); ++l)
          m = std::max(m, std::abs(a(i, j, k, l) - b(i, j, k, l)));
  return m;
}

double max_abs_diff(const Sym3<double>& a, const Sym3<double>& b) {
  double m = 0.0;
  for (Index i = 0; i < a.dim(); ++i)
    for (Index j = 0; j < a.dim(); ++j)
      for (Index k = 0; k < a.dim(); ++k) m = std::max(m, std::abs(a(i, j, k) - b(i, j, k)));
  return m;
}

}  // namespace

TEST_CASE("cumulant to moment round trip is exact") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Index d = 1 + Index(rng.below(4));
    const CumulantSet<double> c = random_cumulants(d, rng);
    const CumulantSet<double> back = cumulants_from_moments(moments_from_cumulants(c));
    CHECK((back.k1 - c.k1).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.k2 - c.k2).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(max_abs_diff(back.k3, c.k3) < 1e-12);
    CHECK(max_abs_diff(back.k4, c.k4) < 1e-12);
  }
}

TEST_CASE("scalar gaussian moments have vanishing higher cumulants") {
  const double mu = 0.8, s2 = 1.7;
  MomentSet<double> m;
  m.m1 = VecXd::Constant(1, mu);
  m.m2 = MatXd::Constant(1, 1, s2 + mu * mu);
  m.m3 = Sym3<double>(1);
  m.m3(0, 0, 0) = mu * mu * mu + 3.0 * mu * s2;
  m.m4 = Sym4<double>(1);
  m.m4(0, 0, 0, 0) = mu * mu * mu * mu + 6.0 * mu * mu * s2 + 3.0 * s2 * s2;

  const auto c = cumulants_from_moments(m);
  CHECK(c.k1[0] == doctest::Approx(mu));
  CHECK(c.k2(0, 0) == doctest::Approx(s2));
  CHECK(c.k3(0, 0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(c.k4(0, 0, 0, 0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("scalar uniform moments give the flat-kurtosis cumulant") {
  const double h = 0.5;  // uniform on [-h, h]
  MomentSet<double> m;
  m.m1 = VecXd::Zero(1);
  m.m2 = MatXd::Constant(1, 1, h * h / 3.0);
  m.m3 = Sym3<double>(1);
  m.m4 = Sym4<double>(1);
  m.m4(0, 0, 0, 0) = h * h * h * h / 5.0;

  const auto c = cumulants_from_moments(m);
  CHECK(c.k4(0, 0, 0, 0) == doctest::Approx(-2.0 * std::pow(h, 4) / 15.0));
}

TEST_CASE("conversion rejects mismatched orders") {
  Rng rng(1);
  CumulantSet<double> c = random_cumulants(3, rng);
  c.k3 = Sym3<double>(2);
  CHECK_THROWS_AS(moments_from_cumulants(c), std::invalid_argument);
}
