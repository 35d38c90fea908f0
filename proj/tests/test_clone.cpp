#include <doctest.h>

#include <filesystem>
#include <string>

#include <json.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "momentlab/clone.hpp"
#include "momentlab/container.hpp"
#include "momentlab/rectangular.hpp"
#include "momentlab/synthetic_images.hpp"

using namespace momentlab;
namespace fs = std::filesystem;

namespace {

struct TempFile {
  fs::path path;
  explicit TempFile(const char* stem)
      : path(fs::temp_directory_path() / (std::string("momentlab_") + stem)) {}
  ~TempFile() {
    std::error_code ec;
    fs::remove(path, ec);
  }
  std::string str() const { return path.string(); }
};

LabeledDataset rect_data(Index per_class, uint64_t seed) {
  return sample_rectangular(RectangularParams{}, per_class, seed);
}

VecXd column_variance(const MatXd& x) {
  const MatXd centered = x.rowwise() - x.colwise().mean();
  return centered.array().square().colwise().sum().transpose() / double(x.rows() - 1);
}

}  // namespace

TEST_CASE("fit recovers class means and covariances") {
  const auto data = rect_data(50000, 21);
  const RectangularAnalytic an{RectangularParams{}};

  const CloneModel full = fit_clone(data, CloneMode::full);
  REQUIRE(full.components.size() == 2);
  CHECK(full.mode == CloneMode::full);
  CHECK(full.dim == 10);
  CHECK(full.components[0].label == -1);
  CHECK(full.components[1].label == 1);
  CHECK(full.components[0].count == 50000);
  CHECK((full.components[1].mean - an.class_mean(+1)).cwiseAbs().maxCoeff() < 0.03);
  CHECK((full.components[1].covariance - an.class_covariance()).cwiseAbs().maxCoeff() < 0.05);

  const CloneModel iso = fit_clone(data, CloneMode::iso);
  const double want_iso = an.class_covariance().trace() / 10.0;
  CHECK(iso.components[0].iso_variance == doctest::Approx(want_iso).epsilon(0.05));
}

TEST_CASE("full keeps coordinate anisotropy, iso flattens it") {
  const auto data = rect_data(20000, 8);
  const Index n = 40000;

  for (const CloneMode mode : {CloneMode::full, CloneMode::iso}) {
    const auto model = fit_clone(data, mode);
    const auto sample = sample_clone(model, n, 99);
    REQUIRE(sample.size() == 2 * n);
    // block layout: component order, labels filled in
    CHECK(sample.labels.head(n).minCoeff() == -1);
    CHECK(sample.labels.head(n).maxCoeff() == -1);
    CHECK(sample.labels.tail(n).minCoeff() == 1);

    const VecXd var = column_variance(sample.inputs.topRows(n));
    const double ratio = var[0] / var[2];  // a^2/3 vs unit coordinate
    if (mode == CloneMode::full)
      CHECK(ratio > 1.2);
    else
      CHECK(ratio == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("sampling is deterministic in the seed") {
  const auto model = fit_clone(rect_data(500, 4), CloneMode::full);
  const auto a = sample_clone(model, 64, 7);
  const auto b = sample_clone(model, 64, 7);
  const auto c = sample_clone(model, 64, 8);
  CHECK((a.inputs.array() == b.inputs.array()).all());
  CHECK((a.inputs.array() != c.inputs.array()).any());
}

TEST_CASE("save and load round trip both modes bit exactly") {
  const auto data = rect_data(2000, 13);
  for (const CloneMode mode : {CloneMode::full, CloneMode::iso}) {
    CloneModel model = fit_clone(data, mode);
    model.clip = true;
    model.clip_lo = -6.0;
    model.clip_hi = 6.0;

    TempFile f(mode == CloneMode::full ? "clone_full.mlcf" : "clone_iso.mlcf");
    save_clone(f.str(), model);
    const CloneModel back = load_clone(f.str());

    CHECK(back.mode == model.mode);
    CHECK(back.dim == model.dim);
    CHECK(back.clip);
    CHECK(back.clip_lo == -6.0);
    CHECK(back.clip_hi == 6.0);
    REQUIRE(back.components.size() == model.components.size());
    for (std::size_t i = 0; i < model.components.size(); ++i) {
      const auto& want = model.components[i];
      const auto& got = back.components[i];
      CHECK(got.label == want.label);
      CHECK(got.count == want.count);
      CHECK((got.mean.array() == want.mean.array()).all());
      if (mode == CloneMode::iso)
        CHECK(got.iso_variance == want.iso_variance);
      else
        CHECK((got.covariance.array() == want.covariance.array()).all());
    }

    // the stored factorization is recomputed, so samples match too
    const auto s1 = sample_clone(model, 32, 5);
    const auto s2 = sample_clone(back, 32, 5);
    CHECK((s1.inputs.array() == s2.inputs.array()).all());
  }
}

TEST_CASE("clipping bounds every coordinate") {
  auto model = fit_clone(rect_data(2000, 17), CloneMode::full);
  model.clip = true;
  model.clip_lo = -0.5;
  model.clip_hi = 0.75;
  const auto s = sample_clone(model, 5000, 3);
  CHECK(s.inputs.minCoeff() >= -0.5);
  CHECK(s.inputs.maxCoeff() <= 0.75);
}

TEST_CASE("validation accepts a faithful model") {
  const auto data = rect_data(20000, 31);
  for (const CloneMode mode : {CloneMode::full, CloneMode::iso}) {
    const auto model = fit_clone(data, mode);
    const auto v = validate_clone(model, 65536, 13);
    CHECK(v.mean_ok);
    CHECK(v.cov_ok);
    CHECK(v.max_mean_err < 0.02);
    CHECK(v.max_cov_err < 0.10);
    CHECK(v.band_violation_fraction <= 0.05);
  }
}

TEST_CASE("validation flags a model whose clipping bites") {
  auto model = fit_clone(rect_data(5000, 31), CloneMode::iso);
  model.clip = true;
  model.clip_lo = -0.6;  // roughly one sigma around means near zero
  model.clip_hi = 0.6;
  const auto v = validate_clone(model, 16384, 12);
  CHECK(!v.cov_ok);
  CHECK(v.band_violation_fraction == 0.0);  // bands only apply unclipped
}

TEST_CASE("degenerate class covariance is repaired to positive definite") {
  auto data = rect_data(300, 2);
  data.inputs.col(7).setConstant(0.25);  // kills one direction of spread
  const auto model = fit_clone(data, CloneMode::full);

  Eigen::LLT<MatXd> llt(model.components[0].covariance);
  CHECK(llt.info() == Eigen::Success);

  const auto s = sample_clone(model, 1000, 9);
  const VecXd var = column_variance(s.inputs.topRows(1000));
  CHECK(var[7] < 1e-4);  // floored, not inflated
  CHECK(var[0] > 0.5);
}

TEST_CASE("image scale fit stays positive definite and honest under clipping") {
  // 300 samples in 1024 dimensions: the raw class covariance is rank
  // deficient, so this exercises the eigenvalue floor at realistic size
  const auto records = synthesize_image_records({300, 5});
  auto gray = cifar_dataset(records, true);
  std::vector<Index> keep;
  for (Index r = 0; r < gray.size(); ++r)
    if (gray.labels[r] == 0) keep.push_back(r);
  LabeledDataset cls0;
  cls0.inputs.resize(Index(keep.size()), gray.dim());
  cls0.labels = Eigen::VectorXi::Zero(Index(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) cls0.inputs.row(Index(i)) = gray.inputs.row(keep[i]);

  auto model = fit_clone(cls0, CloneMode::full);
  model.clip = true;
  model.clip_lo = 0.0;
  model.clip_hi = 255.0;

  const MatXd& cov = model.components[0].covariance;
  Eigen::SelfAdjointEigenSolver<MatXd> es(cov);
  const double floor = 1e-6 * cov.trace() / double(cov.rows());
  CHECK(es.eigenvalues().minCoeff() == doctest::Approx(floor).epsilon(1e-3));
  CHECK(Eigen::LLT<MatXd>(cov).info() == Eigen::Success);

  // pixel values live far enough inside [0,255] that clipping barely
  // shifts the moments
  const auto v = validate_clone(model, 36864, 2);
  CHECK(v.mean_ok);
  CHECK(v.cov_ok);
}

TEST_CASE("clone input validation") {
  auto data = rect_data(100, 1);
  data.labels[0] = 5;  // lone extra class
  CHECK_THROWS_AS(fit_clone(data, CloneMode::full), std::invalid_argument);

  const auto model = fit_clone(rect_data(100, 1), CloneMode::full);
  CHECK_THROWS_AS(sample_clone(model, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(validate_clone(model, 512, 1), std::invalid_argument);
  CHECK_THROWS_AS(clone_mode_from_string("diag"), std::invalid_argument);
  CHECK_THROWS_AS(sample_clone(CloneModel{}, 10, 1), std::invalid_argument);

  TempFile f("wrongkind.mlcf");
  save_dataset(f.str(), rect_data(16, 2), nlohmann::json::object());
  CHECK_THROWS_WITH_AS(load_clone(f.str()), doctest::Contains("not a clone"),
                       std::runtime_error);
}
