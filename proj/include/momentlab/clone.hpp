#pragma once

// Gaussian-mixture surrogates of a labeled dataset: one component per
// distinct label, carrying either the full class covariance or just an
// isotropic variance. Sampling from a clone preserves first- and
// second-order class statistics (or only scale, for iso) while destroying
// all higher-order structure, which is exactly the ablation the training
// experiments need.

#include <cstdint>
#include <string>
#include <vector>

#include "momentlab/dataset.hpp"
#include "momentlab/random.hpp"
#include "momentlab/types.hpp"

namespace momentlab {

enum class CloneMode { iso, full };
const char* to_string(CloneMode m);
CloneMode clone_mode_from_string(const std::string& name);

struct CloneComponent {
  int label;
  Index count;          // source samples behind the fit
  VecXd mean;
  double iso_variance;  // iso mode
  MatXd covariance;     // full mode, after the positive-definite repair
};

struct CloneModel {
  CloneMode mode = CloneMode::full;
  Index dim = 0;
  bool clip = false;
  double clip_lo = 0.0, clip_hi = 0.0;
  std::vector<CloneComponent> components;  // sorted by label
};

// Fits one component per distinct label (each needs >= 2 samples). Full-mode
// covariances get their eigenvalues floored at 1e-6 tr/dim so the factor
// used for sampling always exists.
CloneModel fit_clone(const LabeledDataset& data, CloneMode mode);

// Balanced draw: components in label order, n_per_component rows each,
// labels set to the component labels. Optional clipping is applied after the
// Gaussian draw.
LabeledDataset sample_clone(const CloneModel& model, Index n_per_component, uint64_t seed);

void save_clone(const std::string& path, const CloneModel& model);
CloneModel load_clone(const std::string& path);

struct CloneValidation {
  double max_mean_err;             // max over components, coords; relative to rms scale
  double max_cov_err;              // worst projected-variance mismatch, relative
  bool mean_ok, cov_ok;            // 2% / 10% thresholds
  double band_violation_fraction;  // unclipped only: per-coordinate 3 sigma mean bands
  Index n_per_component;
};

// Endless per-sample draw over the mixture with uniform component choice,
// for online SGD. Labels are the component labels.
class CloneStream {
 public:
  CloneStream(const CloneModel& model, uint64_t seed);
  void next(VecXd& x, int& y);
  Index dim() const { return model_.dim; }

 private:
  CloneModel model_;
  std::vector<MatXd> chols_;    // full mode, one per component
  std::vector<double> sigmas_;  // iso mode
  Rng rng_;
  VecXd z_;
};

// Draws from the model and checks sample moments against the model's own mean
// and covariance. The covariance check compares variances along 64 fixed
// random directions, which stays sharp at any dimension. Unclipped models must
// also keep per-coordinate means inside Monte Carlo 3 sigma bands (up to the
// expected false-positive rate).
CloneValidation validate_clone(const CloneModel& model, Index n_per_component, uint64_t seed);

}  // namespace momentlab
