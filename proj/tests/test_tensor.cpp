#include <doctest.h>

#include <array>

#include "momentlab/random.hpp"
#include "momentlab/tensor.hpp"

using namespace momentlab;

namespace {

MatXd random_symmetric(Index d, Rng& rng) {
  MatXd m(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = i; j < d; ++j) m(i, j) = m(j, i) = rng.uniform(-1.0, 1.0);
  return m;
}

VecXd random_vec(Index d, Rng& rng) {
  VecXd v(d);
  for (Index i = 0; i < d; ++i) v[i] = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("singleton-pair bracket components") {
  VecXd v(2);
  v << 0.7, -1.3;
  MatXd m(2, 2);
  m << 2.0, 0.5, 0.5, -1.0;
  const auto t = bracket_sum(v, m);

  CHECK(t(0, 0, 0) == doctest::Approx(3.0 * v[0] * m(0, 0)));
  // one singleton on the first index plus two pair placements
  CHECK(t(0, 1, 1) == doctest::Approx(v[0] * m(1, 1) + 2.0 * v[1] * m(0, 1)));
  CHECK(t(1, 1, 1) == doctest::Approx(3.0 * v[1] * m(1, 1)));
}

TEST_CASE("bracket term counts on coincident indices") {
  Rng rng(11);
  const Index d = 3;
  const VecXd v = random_vec(d, rng);
  const MatXd m = random_symmetric(d, rng);
  const Sym3<double> t3 = outer3(v);

  for (Index i = 0; i < d; ++i) {
    CHECK(bracket_sum(v, m)(i, i, i) == doctest::Approx(3.0 * v[i] * m(i, i)));
    CHECK(bracket_sum(v, t3)(i, i, i, i) == doctest::Approx(4.0 * v[i] * t3(i, i, i)));
    CHECK(bracket_sum(m)(i, i, i, i) == doctest::Approx(3.0 * m(i, i) * m(i, i)));
    CHECK(bracket_sum2(v, m)(i, i, i, i) == doctest::Approx(6.0 * v[i] * v[i] * m(i, i)));
  }
}

TEST_CASE("pair-pair bracket on the identity is the Wick delta pattern") {
  const Index d = 4;
  const auto t = bracket_sum(MatXd(MatXd::Identity(d, d)));
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      for (Index k = 0; k < d; ++k)
        for (Index l = 0; l < d; ++l) {
          const double want = double(i == j && k == l) + double(i == k && j == l) +
                              double(i == l && j == k);
          CHECK(t(i, j, k, l) == doctest::Approx(want));
        }
}

TEST_CASE("bracket outputs are permutation symmetric") {
  Rng rng(7);
  const Index d = 4;
  const VecXd v = random_vec(d, rng);
  const MatXd m = random_symmetric(d, rng);
  Sym3<double> t3 = bracket_sum(v, m);
  t3 += outer3(random_vec(d, rng));

  const auto t4a = bracket_sum(v, t3);
  const auto t4b = bracket_sum(m);
  const auto t4c = bracket_sum2(v, m);

  for (int trial = 0; trial < 200; ++trial) {
    const Index i = Index(rng.below(d)), j = Index(rng.below(d)), k = Index(rng.below(d)),
                l = Index(rng.below(d));
    CHECK(t3(i, j, k) == doctest::Approx(t3(k, i, j)));
    CHECK(t3(i, j, k) == doctest::Approx(t3(j, i, k)));
    for (const auto* t : {&t4a, &t4b, &t4c}) {
      CHECK((*t)(i, j, k, l) == doctest::Approx((*t)(l, k, j, i)));
      CHECK((*t)(i, j, k, l) == doctest::Approx((*t)(j, i, l, k)));
      CHECK((*t)(i, j, k, l) == doctest::Approx((*t)(k, l, i, j)));
    }
  }
}

TEST_CASE("contractions match explicit loops") {
  Rng rng(23);
  const Index d = 3;
  const VecXd v = random_vec(d, rng);
  const VecXd u = random_vec(d, rng);
  const MatXd m = random_symmetric(d, rng);

  const Sym3<double> t3 = bracket_sum(v, m);
  VecXd want3 = VecXd::Zero(d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      for (Index k = 0; k < d; ++k) want3[i] += t3(i, j, k) * u[j] * u[k];
  CHECK((t3.contract2(u) - want3).norm() == doctest::Approx(0.0).epsilon(1e-12));

  // rank-one check: (v x v x v x v) contracted thrice gives v (v.u)^3
  const auto t4 = outer4(v);
  const double vu = v.dot(u);
  CHECK((t4.contract3(u) - v * vu * vu * vu).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("dense dimension cap is enforced") {
  CHECK_THROWS_AS(Sym3<double>(kDenseTensorDimCap + 1), std::invalid_argument);
  CHECK_THROWS_AS(Sym4<double>(kDenseTensorDimCap + 1), std::invalid_argument);
  CHECK_THROWS_AS(Sym3<double>(0), std::invalid_argument);
  CHECK_NOTHROW(Sym3<double>(kDenseTensorDimCap + 1, 128));
}
