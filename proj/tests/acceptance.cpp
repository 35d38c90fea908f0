// Release gate: ten end-to-end checks, one line of output each. Exit code is
// the number of failures. Heavy statistical checks run the shipped experiment
// configs at their default seeds, so every asserted number is deterministic.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "momentlab/classifiers.hpp"
#include "momentlab/experiments.hpp"
#include "momentlab/moments.hpp"
#include "momentlab/random.hpp"
#include "momentlab/rectangular.hpp"

namespace {

using namespace momentlab;
namespace fs = std::filesystem;

std::string fmtv(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

const fs::path& out_root() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "momentlab-acceptance";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

void run_named(const std::string& id, const std::string& dir, Index jobs,
               const std::map<std::string, std::string>& overrides) {
  run_experiment(make_experiment_config(id, "", (out_root() / dir).string(), jobs, overrides));
}

struct SummaryRow {
  double mean, std;
  long n;
};

std::map<std::string, SummaryRow> read_summary(const std::string& dir) {
  const fs::path path = out_root() / dir / "summary.csv";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing " + path.string());
  std::map<std::string, SummaryRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string metric, item, mean, sd, n;
    std::getline(ss, metric, ',');
    std::getline(ss, item, ',');
    std::getline(ss, mean, ',');
    std::getline(ss, sd, ',');
    std::getline(ss, n, ',');
    rows[metric + "/" + item] = {std::strtod(mean.c_str(), nullptr),
                                 std::strtod(sd.c_str(), nullptr), std::strtol(n.c_str(), nullptr, 10)};
  }
  return rows;
}

const SummaryRow& row(const std::map<std::string, SummaryRow>& rows, const std::string& key) {
  auto it = rows.find(key);
  if (it == rows.end()) throw std::runtime_error("summary row missing: " + key);
  return it->second;
}

// expects `cond`; on failure appends a readable clause to `fail`
void expect(std::string& fail, bool cond, const std::string& what) {
  if (cond) return;
  if (!fail.empty()) fail += "; ";
  fail += what;
}

// ---- 1: moment/cumulant algebra ---------------------------------------

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

std::string check_round_trip(std::string& info) {
  std::string fail;
  Rng rng(7);
  double max_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index d = 1 + Index(rng.below(4));
    CumulantSet<double> c;
    c.k1.resize(d);
    for (Index i = 0; i < d; ++i) c.k1[i] = rng.uniform(-1.0, 1.0);
    c.k2.resize(d, d);
    for (Index i = 0; i < d; ++i)
      for (Index j = i; j < d; ++j) c.k2(i, j) = c.k2(j, i) = rng.uniform(-1.0, 1.0);
    c.k3 = random_sym3(d, rng);
    c.k4 = random_sym4(d, rng);

    const CumulantSet<double> back = cumulants_from_moments(moments_from_cumulants(c));
    max_err = std::max(max_err, (back.k1 - c.k1).cwiseAbs().maxCoeff());
    max_err = std::max(max_err, (back.k2 - c.k2).cwiseAbs().maxCoeff());
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j)
        for (Index k = 0; k < d; ++k) {
          max_err = std::max(max_err, std::abs(back.k3(i, j, k) - c.k3(i, j, k)));
          for (Index l = 0; l < d; ++l)
            max_err = std::max(max_err, std::abs(back.k4(i, j, k, l) - c.k4(i, j, k, l)));
        }
  }
  // entries are O(1), so the absolute gap is the relative one
  expect(fail, max_err < 1e-12, "round-trip error " + fmtv(max_err) + " >= 1e-12");

  bool wick_exact = true;
  for (int trial = 0; trial < 20; ++trial) {
    const Index d = 1 + Index(rng.below(4));
    CumulantSet<double> g;
    g.k1 = VecXd::Zero(d);
    g.k2.resize(d, d);
    for (Index i = 0; i < d; ++i)
      for (Index j = i; j < d; ++j) g.k2(i, j) = g.k2(j, i) = rng.uniform(-1.0, 1.0);
    g.k3 = Sym3<double>(d);
    g.k4 = Sym4<double>(d);
    const MomentSet<double> m = moments_from_cumulants(g);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j)
        for (Index k = 0; k < d; ++k)
          for (Index l = 0; l < d; ++l) {
            const double wick = g.k2(i, j) * g.k2(k, l) + g.k2(i, k) * g.k2(j, l) +
                                g.k2(i, l) * g.k2(j, k);
            if (m.m4(i, j, k, l) != wick) wick_exact = false;
          }
  }
  expect(fail, wick_exact, "gaussian fourth moment deviates from the pair-sum identity");
  info = "max err " + fmtv(max_err) + ", pair-sum identity exact";
  return fail;
}

// ---- 2: estimators vs closed-form rectangle moments -------------------

std::string check_estimator_oracle(std::string& info) {
  std::string fail;
  const RectangularParams p;
  const Index D = p.dim;
  const Index chunks = 20, per_class = 250000;
  const double n_class = double(chunks) * double(per_class);

  // raw power sums per class; additive over chunks, so the result equals the
  // one-shot plug-in estimate without ever holding 10^7 rows
  VecXd s1[2], s3[2], s4[2];
  MatXd s2[2];
  for (int c = 0; c < 2; ++c) {
    s1[c] = s3[c] = s4[c] = VecXd::Zero(D);
    s2[c] = MatXd::Zero(D, D);
  }
  for (Index chunk = 0; chunk < chunks; ++chunk) {
    const LabeledDataset ds = sample_rectangular(p, per_class, 1000 + uint64_t(chunk));
    for (Index r = 0; r < ds.size(); ++r) {
      const int c = ds.labels[r] == 1 ? 0 : 1;
      const VecXd x = ds.inputs.row(r).transpose();
      s1[c] += x;
      s2[c] += x * x.transpose();
      s3[c] += x.array().cube().matrix();
      s4[c] += x.array().square().square().matrix();
    }
  }

  const RectangularAnalytic an(p);
  const MatXd cov_true = an.class_covariance();
  const VecXd k4_true = an.fourth_cumulant_diagonal();
  double max_z = 0.0;
  for (int c = 0; c < 2; ++c) {
    const VecXd mean_true = an.class_mean(c == 0 ? 1 : -1);
    const VecXd mu = s1[c] / n_class;
    const MatXd cov = s2[c] / n_class - mu * mu.transpose();

    for (Index i = 0; i < D; ++i) {
      // central moments of one coordinate: uniform half-width h or unit gaussian
      const double h = i == 0 ? p.a : p.b;
      const bool uni = i < 2;
      const double m2 = uni ? h * h / 3.0 : 1.0;
      const double m4 = uni ? h * h * h * h / 5.0 : 3.0;
      // influence variance of the plug-in fourth cumulant: 192/1575 h^8 for
      // the uniform coordinate, 24 for the gaussian one
      const double k4_var = uni ? 192.0 / 1575.0 * std::pow(h, 8) : 24.0;

      max_z = std::max(max_z, std::abs(mu[i] - mean_true[i]) / std::sqrt(m2 / n_class));
      max_z = std::max(max_z,
                       std::abs(cov(i, i) - cov_true(i, i)) / std::sqrt((m4 - m2 * m2) / n_class));
      for (Index j = 0; j < i; ++j) {
        const double m2j = j == 0 ? p.a * p.a / 3.0 : (j == 1 ? p.b * p.b / 3.0 : 1.0);
        max_z = std::max(max_z, std::abs(cov(i, j)) / std::sqrt(m2 * m2j / n_class));
      }

      const double m4c = s4[c][i] / n_class - 4.0 * mu[i] * s3[c][i] / n_class +
                         6.0 * mu[i] * mu[i] * s2[c](i, i) / n_class - 3.0 * std::pow(mu[i], 4);
      const double k4 = m4c - 3.0 * cov(i, i) * cov(i, i);
      max_z = std::max(max_z, std::abs(k4 - k4_true[i]) / std::sqrt(k4_var / n_class));
    }
  }
  expect(fail, max_z <= 3.0, "some statistic sits " + fmtv(max_z) + " sigma from its target");
  info = "n=10^7, worst deviation " + fmtv(max_z) + " sigma";
  return fail;
}

// ---- 3: classifier geometry and the wrong-tensor controls -------------

std::string check_classifier_geometry(std::string& info) {
  std::string fail;
  const RectangularParams p;
  const LabeledDataset ds = sample_rectangular(p, 1000000, 42);
  const ClassStats stats = estimate_class_stats(ds);
  const VecXd oracle = RectangularAnalytic(p).oracle_direction();

  const LinearClassifier lda = linear_discriminant(stats);
  const double th_naive = alignment(naive_classifier(stats).w, oracle);
  const double th_lda = alignment(lda.w, oracle);

  for (double c3 : {0.01, 0.05, 0.1}) {
    const auto corr = correction_classifier(ds, stats, lda, FourthOrderStat::within_cumulant, c3);
    const double th_corr = alignment(corr.classifier.w, oracle);
    expect(fail, th_corr < th_lda && th_lda < th_naive,
           "ordering broken at c3=" + fmtv(c3) + " (corr " + fmtv(th_corr) + ", lda " +
               fmtv(th_lda) + ", naive " + fmtv(th_naive) + ")");
  }

  // the added direction itself: the within-class cumulant points at the
  // oracle, the moment-tensor controls point away from it
  const double good =
      alignment(correction_classifier(ds, stats, lda, FourthOrderStat::within_cumulant, 0.05)
                    .correction,
                oracle);
  const double ctrl_wm =
      alignment(correction_classifier(ds, stats, lda, FourthOrderStat::within_moment, 0.05)
                    .correction,
                oracle);
  const double ctrl_fm =
      alignment(
          correction_classifier(ds, stats, lda, FourthOrderStat::full_moment, 0.05).correction,
          oracle);
  expect(fail, good < 0.1, "within-cumulant correction is " + fmtv(good) + " rad off the oracle");
  expect(fail, ctrl_wm > 1.0,
         "within-moment control still points at the oracle (" + fmtv(ctrl_wm) + " rad)");
  expect(fail, ctrl_fm > 1.0,
         "full-moment control still points at the oracle (" + fmtv(ctrl_fm) + " rad)");
  info = "theta naive/lda " + fmtv(th_naive) + "/" + fmtv(th_lda) + ", corrections " +
         fmtv(good) + " vs " + fmtv(ctrl_wm) + "|" + fmtv(ctrl_fm) + " rad";
  return fail;
}

// ---- 4: truncated flow hierarchy ---------------------------------------

std::string check_truncated_flow(std::string& info) {
  std::string fail;
  run_named("truncated-gf", "gf", 1, {{"stats", "analytic"}});
  const auto s = read_summary("gf");
  const double k0 = row(s, "final_theta/K0_vs_naive").mean;
  const double k1 = row(s, "final_theta/K1_vs_steady").mean;
  const double k2 = row(s, "final_theta/K2_vs_K1").mean;
  const double acc1 = row(s, "final_accuracy/K1").mean;
  const double acc3 = row(s, "final_accuracy/K3").mean;
  expect(fail, k0 < 0.01, "K=0 is " + fmtv(k0) + " rad from the mean direction");
  expect(fail, k1 < 0.01, "K=1 is " + fmtv(k1) + " rad from its fixed point");
  expect(fail, k2 < 0.01, "K=2 departs from K=1 by " + fmtv(k2) + " rad");
  expect(fail, acc3 > acc1,
         "cubic term gains nothing (" + fmtv(acc3) + " vs " + fmtv(acc1) + ")");
  info = "thetas " + fmtv(k0) + "/" + fmtv(k1) + "/" + fmtv(k2) + ", K3 gain " +
         fmtv(acc3 - acc1);
  return fail;
}

// ---- 5: alignment minima arrive in statistic order ---------------------

std::string check_alignment_order(std::string& info) {
  std::string fail;
  run_named("rect-alignment", "align", 1, {});
  const auto s = read_summary("align");
  const double nl = row(s, "ordering/naive_before_lda").mean;
  const double lc = row(s, "ordering/lda_before_corr").mean;
  expect(fail, nl >= 0.6, "naive minimum first in only " + fmtv(nl) + " of seeds");
  expect(fail, lc >= 0.6, "lda minimum before corrected in only " + fmtv(lc) + " of seeds");
  info = "naive<lda in " + fmtv(nl) + ", lda<corr in " + fmtv(lc) + " of seeds";
  return fail;
}

// ---- 6: perceptron clone collapse --------------------------------------

std::string check_clone_collapse(std::string& info) {
  std::string fail;
  run_named("rect-clone-collapse", "clone", 1, {});
  const auto s = read_summary("clone");
  const double gm_final = row(s, "final_analytic_accuracy/gm").mean;
  const double lda_acc = row(s, "analytic_accuracy/lda").mean;
  const double div_gm = row(s, "divergence_step/gm-vs-real").mean;
  const double iso_first = row(s, "ordering/iso_diverges_no_later_than_gm").mean;
  expect(fail, std::abs(gm_final - lda_acc) <= 0.01,
         "clone-trained plateau " + fmtv(gm_final) + " vs lda " + fmtv(lda_acc));
  expect(fail, div_gm >= 100.0,
         "no initial agreement window before divergence (step " + fmtv(div_gm) + ")");
  expect(fail, iso_first == 1.0, "isotropic clone diverges after the full clone");
  info = "gm plateau " + fmtv(gm_final) + " (lda " + fmtv(lda_acc) + "), splits at step " +
         fmtv(div_gm);
  return fail;
}

// ---- 7: sample-size crossover -------------------------------------------

std::string check_finite_sample(std::string& info) {
  std::string fail;
  run_named("finite-sample", "finite", 1, {});
  const auto s = read_summary("finite");
  const double cross = row(s, "crossover_n_per_class/real-vs-gm").mean;
  const double bounded = row(s, "gm_bounded_by_lda_3sigma/all_n").mean;
  expect(fail, cross >= 2.0 && cross <= 4096.0,
         "no indistinguishable-then-separated crossover (n " + fmtv(cross) + ")");
  expect(fail, bounded == 1.0, "clone-trained accuracy exceeds the lda ceiling somewhere");
  info = "curves split at n=" + fmtv(cross) + " per class, clone capped by lda everywhere";
  return fail;
}

// ---- 8: network-scale clone collapse ------------------------------------

std::string check_mlp_collapse(std::string& info) {
  std::string fail;
  run_named("mlp-clone-collapse", "mlp", 1, {});
  const auto s = read_summary("mlp");
  const auto& real = row(s, "final_accuracy/real");
  const auto& gm = row(s, "final_accuracy/gm");
  const double iso_first = row(s, "ordering/iso_diverges_no_later_than_gm").mean;
  const double chance = row(s, "above_chance/gm_final").mean;
  const double band = 3.0 * std::sqrt((real.std * real.std + gm.std * gm.std) / 2.0);
  expect(fail, iso_first == 1.0, "isotropic clone diverges after the full clone");
  expect(fail, chance == 1.0, "clone-trained network is at chance on real data");
  expect(fail, std::abs(gm.mean - real.mean) <= band,
         "clone-trained final accuracy " + fmtv(gm.mean) + " off real " + fmtv(real.mean) +
             " beyond " + fmtv(band));
  info = "final real/gm " + fmtv(real.mean) + "/" + fmtv(gm.mean) + ", band " + fmtv(band);
  return fail;
}

// ---- 9: two vs ten mixture components -----------------------------------

std::string check_mixture_count(std::string& info) {
  std::string fail;
  run_named("cifar10c-mixtures", "c10c", 1, {});
  const auto s = read_summary("c10c");
  const double div = row(s, "divergence_step/gm2-vs-gm10").mean;
  const double ten_wins = row(s, "ordering/gm10_final_ge_gm2").mean;
  expect(fail, div == -1.0 || div >= 10.0,
         "2- and 10-component curves separate immediately (step " + fmtv(div) + ")");
  expect(fail, ten_wins == 1.0, "10-component clone ends below the 2-component clone");
  info = "agree through step " + (div == -1.0 ? std::string("end") : fmtv(div)) +
         ", 10-component ahead at the end";
  return fail;
}

// ---- 10: byte-identical reruns -------------------------------------------

std::string check_determinism(std::string& info) {
  std::string fail;
  const std::map<std::string, std::string> overrides = {{"n_fit", "3000"}, {"seeds", "1,2"}};
  run_named("rect-boundaries", "det_a", 1, overrides);
  run_named("rect-boundaries", "det_b", 2, overrides);

  auto slurp = [](const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  int compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(out_root() / "det_a")) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    const fs::path rel = fs::relative(entry.path(), out_root() / "det_a");
    ++compared;
    if (slurp(entry.path()) != slurp(out_root() / "det_b" / rel))
      expect(fail, false, rel.string() + " differs between reruns");
  }
  expect(fail, compared >= 3, "expected at least summary plus per-seed files");
  info = std::to_string(compared) + " CSVs byte-identical across reruns and worker counts";
  return fail;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::string (*fn)(std::string&);
  };
  const std::vector<Criterion> criteria = {
      {"moment/cumulant algebra", check_round_trip},
      {"estimators vs closed-form moments", check_estimator_oracle},
      {"classifier geometry and controls", check_classifier_geometry},
      {"truncated-flow hierarchy", check_truncated_flow},
      {"alignment minima ordering", check_alignment_order},
      {"perceptron clone collapse", check_clone_collapse},
      {"finite-sample crossover", check_finite_sample},
      {"network clone collapse", check_mlp_collapse},
      {"mixture component count", check_mixture_count},
      {"byte-identical reruns", check_determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string info, fail;
    try {
      fail = criteria[i].fn(info);
    } catch (const std::exception& e) {
      fail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (i == 0 && fail.empty() && secs >= 1.0)
      fail = "algebra check took " + fmtv(secs) + " s, budget is 1 s";
    if (!fail.empty()) ++failures;
    std::printf("[%2zu] %s  %s (%s, %.1f s)\n", i + 1, fail.empty() ? "PASS" : "FAIL",
                criteria[i].name, fail.empty() ? info.c_str() : fail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures;
}
