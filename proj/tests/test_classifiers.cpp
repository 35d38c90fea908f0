#include <doctest.h>

#include <cmath>

#include "momentlab/classifiers.hpp"
#include "momentlab/rectangular.hpp"

using namespace momentlab;

namespace {

constexpr double kPi = 3.14159265358979323846;

LabeledDataset gaussian_two_class(Index dim, Index n_per_class, uint64_t seed) {
  VecXd mu = VecXd::Zero(dim);
  mu[0] = 0.5;
  mu[1] = 1.0;
  LabeledDataset d;
  d.inputs.resize(2 * n_per_class, dim);
  d.labels.resize(2 * n_per_class);
  Rng rng(mix_seed(seed, 0xabc));
  for (Index r = 0; r < 2 * n_per_class; ++r) {
    const int y = r < n_per_class ? -1 : 1;
    for (Index i = 0; i < dim; ++i) d.inputs(r, i) = y * mu[i] + rng.normal();
    d.labels[r] = y;
  }
  return d;
}

}  // namespace

TEST_CASE("alignment basics") {
  VecXd a(3), b(3);
  a << 1, 0, 0;
  b << 0, 2, 0;
  CHECK(alignment(a, a) == doctest::Approx(0.0));
  CHECK(alignment(a, b) == doctest::Approx(kPi / 2));
  CHECK(alignment(a, VecXd(-3 * a)) == doctest::Approx(kPi));
  CHECK_THROWS_AS(alignment(a, VecXd(VecXd::Zero(3))), std::invalid_argument);
}

TEST_CASE("estimated directions approach the population ones") {
  const RectangularParams p;
  const RectangularAnalytic an(p);
  const auto data = sample_rectangular(p, 100000, 21);
  const auto stats = estimate_class_stats(data);

  const auto naive = naive_classifier(stats);
  const auto lda = linear_discriminant(stats);
  CHECK(alignment(naive.w, an.naive_direction()) < 0.01);
  CHECK(alignment(lda.w, an.lda_direction()) < 0.02);

  // the covariance solve swings the boundary from ~26.6 deg off the short
  // axis to under 2 deg
  CHECK(alignment(naive.w, an.oracle_direction()) == doctest::Approx(0.4636).epsilon(0.05));
  CHECK(alignment(lda.w, an.oracle_direction()) < 0.05);

  // unit norms and a near-zero bias on this symmetric task
  CHECK(naive.w.norm() == doctest::Approx(1.0));
  CHECK(lda.w.norm() == doctest::Approx(1.0));
  CHECK(std::abs(naive.bias) < 0.01);
  CHECK(std::abs(lda.bias) < 0.01);
}

TEST_CASE("evaluation on held-out data matches the closed form") {
  const RectangularParams p;
  const RectangularAnalytic an(p);
  const auto train = sample_rectangular(p, 50000, 31);
  const auto eval = sample_rectangular(p, 200000, 32);
  const auto stats = estimate_class_stats(train);

  const auto naive = naive_classifier(stats);
  const auto e = evaluate(naive, eval);
  CHECK(e.accuracy == doctest::Approx(an.accuracy(naive.w, naive.bias)).epsilon(0.002));

  const auto lda = linear_discriminant(stats);
  CHECK(evaluate(lda, eval).accuracy == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(evaluate(lda, eval).square_loss < evaluate(naive, eval).square_loss + 1.0);

  const auto oracle = oracle_classifier(p.dim);
  CHECK(evaluate(oracle, eval).accuracy == 1.0);
}

TEST_CASE("score ties predict positive") {
  LinearClassifier c;
  c.w = VecXd::Zero(2);
  c.w[0] = 1.0;
  VecXd x = VecXd::Zero(2);
  CHECK(c.predict(x) == 1);
}

TEST_CASE("predictions are invariant under global translation") {
  const RectangularParams p;
  auto data = sample_rectangular(p, 20000, 41);
  const auto stats = estimate_class_stats(data);
  const auto lda = linear_discriminant(stats);

  LabeledDataset shifted = data;
  const VecXd offset = VecXd::Constant(p.dim, 2.5);
  shifted.inputs.rowwise() += offset.transpose();
  const auto stats2 = estimate_class_stats(shifted);
  const auto lda2 = linear_discriminant(stats2);

  CHECK(alignment(lda.w, lda2.w) < 1e-8);
  // the recentered bias keeps every prediction the same
  for (Index r = 0; r < 200; ++r)
    CHECK(lda.predict(data.inputs.row(r).transpose()) ==
          lda2.predict(shifted.inputs.row(r).transpose()));
}

TEST_CASE("within-cumulant correction pulls the boundary toward the planted axis") {
  const RectangularParams p;
  const auto data = sample_rectangular(p, 200000, 51);
  const auto stats = estimate_class_stats(data);
  const auto base = linear_discriminant(stats);
  const VecXd oracle = oracle_classifier(p.dim).w;

  const double theta_base = alignment(base.w, oracle);
  for (double c3 : {0.01, 0.05, 0.1}) {
    const auto res =
        correction_classifier(data, stats, base, FourthOrderStat::within_cumulant, c3);
    CHECK(alignment(res.classifier.w, oracle) < theta_base);
    // the added vector itself points down the planted axis
    CHECK(alignment(res.correction, oracle) < 0.02);
  }
}

TEST_CASE("control statistics produce base-dominated corrections") {
  const RectangularParams p;
  const auto data = sample_rectangular(p, 200000, 61);
  const auto stats = estimate_class_stats(data);
  const auto base = linear_discriminant(stats);
  const VecXd oracle = oracle_classifier(p.dim).w;

  const auto wc = correction_classifier(data, stats, base, FourthOrderStat::within_cumulant);
  const auto wm = correction_classifier(data, stats, base, FourthOrderStat::within_moment);
  const auto fc = correction_classifier(data, stats, base, FourthOrderStat::full_cumulant);
  const auto fm = correction_classifier(data, stats, base, FourthOrderStat::full_moment);

  // keeping the Wick part (moment variants) buries the signal under a vector
  // anti-parallel to the base direction; the pooled cumulant keeps the
  // (mean-difference)^4 structure and lands parallel to it instead
  CHECK(alignment(wc.correction, oracle) < 0.02);
  CHECK(alignment(wm.correction, base.w) > kPi - 0.1);
  CHECK(alignment(fm.correction, base.w) > kPi - 0.02);
  CHECK(alignment(fc.correction, base.w) < 0.02);

  // magnitude sanity: the moment controls are dominated by second-order
  // content, so they dwarf or distort the cumulant correction scale
  CHECK(fm.correction.norm() > 10.0 * wc.correction.norm());
}

TEST_CASE("correction vanishes on gaussian data") {
  const auto data = gaussian_two_class(10, 200000, 71);
  const auto stats = estimate_class_stats(data);
  const auto base = linear_discriminant(stats);

  const auto res = correction_classifier(data, stats, base, FourthOrderStat::within_cumulant);
  CHECK(res.correction.norm() < 0.05);
  // and the rectangular one does not vanish, for contrast
  const auto rect = sample_rectangular(RectangularParams{}, 200000, 72);
  const auto rstats = estimate_class_stats(rect);
  const auto rres = correction_classifier(rect, rstats, linear_discriminant(rstats),
                                          FourthOrderStat::within_cumulant);
  CHECK(rres.correction.norm() > 0.08);
}

TEST_CASE("corrected direction is invariant under data rescaling") {
  const RectangularParams p;
  auto data = sample_rectangular(p, 50000, 81);
  LabeledDataset scaled = data;
  scaled.inputs *= 3.0;

  auto run = [](const LabeledDataset& d) {
    const auto stats = estimate_class_stats(d);
    return correction_classifier(d, stats, linear_discriminant(stats),
                                 FourthOrderStat::within_cumulant, 0.05);
  };
  const auto a = run(data);
  const auto b = run(scaled);
  CHECK(alignment(a.classifier.w, b.classifier.w) < 1e-9);
  CHECK((a.correction - b.correction).norm() < 1e-9 * std::max(1.0, a.correction.norm()));
}

TEST_CASE("classifier constructions validate their inputs") {
  const auto data = gaussian_two_class(4, 100, 91);
  auto stats = estimate_class_stats(data);

  stats.mean_difference.setZero();
  CHECK_THROWS_AS(naive_classifier(stats), std::runtime_error);

  stats = estimate_class_stats(data);
  stats.within_class_covariance.setZero();
  CHECK_THROWS_AS(linear_discriminant(stats), std::runtime_error);

  CHECK_THROWS_AS(oracle_classifier(4, 7), std::invalid_argument);
}
