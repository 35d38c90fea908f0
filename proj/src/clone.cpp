#include "momentlab/clone.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <map>
#include <stdexcept>

#include "momentlab/container.hpp"
#include "momentlab/random.hpp"

namespace momentlab {

const char* to_string(CloneMode m) {
  switch (m) {
    case CloneMode::iso: return "iso";
    case CloneMode::full: return "full";
  }
  throw std::logic_error("unknown clone mode");
}

CloneMode clone_mode_from_string(const std::string& name) {
  if (name == "iso") return CloneMode::iso;
  if (name == "full") return CloneMode::full;
  throw std::invalid_argument("unknown clone mode '" + name + "' (expected iso or full)");
}

namespace {

MatXd repair_covariance(const MatXd& cov) {
  const double tr = cov.trace();
  if (!(tr > 0.0)) throw std::runtime_error("fit_clone: class covariance has no mass");
  const double floor = 1e-6 * tr / double(cov.rows());
  Eigen::SelfAdjointEigenSolver<MatXd> es(cov);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("fit_clone: covariance eigendecomposition failed");
  VecXd ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// per-component sampling state, so validation chunks reuse one factorization
struct PreparedComponent {
  const CloneComponent* comp;
  MatXd chol;    // full mode
  double sigma;  // iso mode
};

PreparedComponent prepare(const CloneModel& model, const CloneComponent& comp) {
  PreparedComponent p{&comp, {}, 0.0};
  if (model.mode == CloneMode::full) {
    Eigen::LLT<MatXd> llt(comp.covariance);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("clone: component covariance is not positive definite");
    p.chol = llt.matrixL();
  } else {
    if (!(comp.iso_variance > 0.0)) throw std::runtime_error("clone: nonpositive iso variance");
    p.sigma = std::sqrt(comp.iso_variance);
  }
  return p;
}

void draw_rows(const CloneModel& model, const PreparedComponent& p, Rng& rng, MatXd& out) {
  const Index d = model.dim;
  // one column per output row so the whole chunk moves through a single
  // triangular product, which is what keeps image-sized dimensions usable
  MatXd z(d, out.rows());
  for (Index c = 0; c < out.rows(); ++c)
    for (Index i = 0; i < d; ++i) z(i, c) = rng.normal();
  MatXd x;
  if (model.mode == CloneMode::iso)
    x = p.sigma * z;
  else
    x = p.chol.triangularView<Eigen::Lower>() * z;
  x.colwise() += p.comp->mean;
  if (model.clip) x = x.cwiseMax(model.clip_lo).cwiseMin(model.clip_hi);
  out = x.transpose();
}

}  // namespace

CloneModel fit_clone(const LabeledDataset& data, CloneMode mode) {
  check_dataset(data, "fit_clone");
  std::map<int, std::vector<Index>> groups;
  for (Index r = 0; r < data.size(); ++r) groups[data.labels[r]].push_back(r);

  CloneModel model;
  model.mode = mode;
  model.dim = data.dim();
  for (const auto& [label, rows] : groups) {
    if (rows.size() < 2)
      throw std::invalid_argument("fit_clone: label " + std::to_string(label) +
                                  " has fewer than two samples");
    CloneComponent c;
    c.label = label;
    c.count = static_cast<Index>(rows.size());

    MatXd x(c.count, data.dim());
    for (Index r = 0; r < c.count; ++r) x.row(r) = data.inputs.row(rows[static_cast<std::size_t>(r)]);
    c.mean = x.colwise().mean().transpose();
    const MatXd centered = x.rowwise() - c.mean.transpose();

    if (mode == CloneMode::iso) {
      // average per-coordinate unbiased variance; direction structure dropped
      c.iso_variance = centered.array().square().sum() / double((c.count - 1) * data.dim());
      if (!(c.iso_variance > 0.0))
        throw std::runtime_error("fit_clone: class " + std::to_string(label) + " has zero spread");
    } else {
      c.covariance = repair_covariance((centered.adjoint() * centered) / double(c.count - 1));
    }
    model.components.push_back(std::move(c));
  }
  return model;
}

LabeledDataset sample_clone(const CloneModel& model, Index n_per_component, uint64_t seed) {
  if (model.components.empty()) throw std::invalid_argument("sample_clone: model has no components");
  if (n_per_component < 1) throw std::invalid_argument("sample_clone: n_per_component must be positive");

  const Index total = n_per_component * static_cast<Index>(model.components.size());
  LabeledDataset out;
  out.inputs.resize(total, model.dim);
  out.labels.resize(total);

  MatXd block(n_per_component, model.dim);
  for (std::size_t ci = 0; ci < model.components.size(); ++ci) {
    const CloneComponent& c = model.components[ci];
    const PreparedComponent p = prepare(model, c);
    Rng rng(mix_seed(seed, 0x636c6f6e65ull, static_cast<uint64_t>(ci)));
    draw_rows(model, p, rng, block);
    const Index start = static_cast<Index>(ci) * n_per_component;
    out.inputs.middleRows(start, n_per_component) = block;
    out.labels.segment(start, n_per_component).setConstant(c.label);
  }
  return out;
}

void save_clone(const std::string& path, const CloneModel& model) {
  if (model.components.empty()) throw std::invalid_argument("save_clone: model has no components");
  ContainerWriter w("clone");
  w.meta()["mode"] = to_string(model.mode);
  w.meta()["dim"] = model.dim;
  w.meta()["clip"] = model.clip;
  if (model.clip) {
    w.meta()["clip_lo"] = model.clip_lo;
    w.meta()["clip_hi"] = model.clip_hi;
  }

  const Index c = static_cast<Index>(model.components.size());
  Eigen::VectorXi labels(c);
  Eigen::VectorXi counts(c);
  MatXd means(c, model.dim);
  VecXd iso(c);
  std::vector<double> covs;
  for (Index i = 0; i < c; ++i) {
    const auto& comp = model.components[static_cast<std::size_t>(i)];
    labels[i] = comp.label;
    counts[i] = static_cast<int>(comp.count);
    means.row(i) = comp.mean.transpose();
    if (model.mode == CloneMode::iso) iso[i] = comp.iso_variance;
    else {
      using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
      const RowMat rm = comp.covariance;
      covs.insert(covs.end(), rm.data(), rm.data() + rm.size());
    }
  }
  w.add_labels("labels", labels);
  w.add_labels("counts", counts);
  w.add_matrix("means", means);
  if (model.mode == CloneMode::iso)
    w.add_vector("iso_variance", iso);
  else
    w.add_f64("covariances", covs.data(), {c, model.dim, model.dim});
  w.write(path);
}

CloneModel load_clone(const std::string& path) {
  const Container c = Container::read(path);
  if (c.kind() != "clone")
    throw std::runtime_error("load_clone: '" + path + "' holds a " + c.kind() + ", not a clone");

  CloneModel model;
  model.mode = clone_mode_from_string(c.meta().at("mode").get<std::string>());
  model.dim = c.meta().at("dim").get<Index>();
  model.clip = c.meta().value("clip", false);
  if (model.clip) {
    model.clip_lo = c.meta().at("clip_lo").get<double>();
    model.clip_hi = c.meta().at("clip_hi").get<double>();
  }

  const Eigen::VectorXi labels = c.i32_vector("labels");
  const Eigen::VectorXi counts = c.i32_vector("counts");
  const MatXd means = c.f64_matrix("means");
  if (means.rows() != labels.size() || means.cols() != model.dim || counts.size() != labels.size())
    throw std::runtime_error("load_clone: component arrays disagree");

  VecXd iso;
  std::vector<double> covs;
  if (model.mode == CloneMode::iso) {
    iso = c.f64_vector("iso_variance");
    if (iso.size() != labels.size()) throw std::runtime_error("load_clone: component arrays disagree");
  } else {
    const auto cov_shape = c.shape("covariances");
    if (cov_shape.size() != 3 || cov_shape[0] != labels.size() || cov_shape[1] != model.dim ||
        cov_shape[2] != model.dim)
      throw std::runtime_error("load_clone: covariance block has the wrong shape");
    covs = c.f64_array("covariances");
  }

  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Index d = model.dim;
  for (Index i = 0; i < labels.size(); ++i) {
    CloneComponent comp;
    comp.label = labels[i];
    comp.count = counts[i];
    comp.mean = means.row(i).transpose();
    if (model.mode == CloneMode::iso)
      comp.iso_variance = iso[i];
    else
      comp.covariance =
          Eigen::Map<const RowMat>(covs.data() + static_cast<std::size_t>(i) * d * d, d, d);
    model.components.push_back(std::move(comp));
  }
  return model;
}

CloneStream::CloneStream(const CloneModel& model, uint64_t seed)
    : model_(model), rng_(mix_seed(seed, 0x636c6f6e6573ull)), z_(model.dim) {
  if (model_.components.empty())
    throw std::invalid_argument("CloneStream: model has no components");
  for (const auto& comp : model_.components) {
    const PreparedComponent p = prepare(model_, comp);
    if (model_.mode == CloneMode::full)
      chols_.push_back(p.chol);
    else
      sigmas_.push_back(p.sigma);
  }
}

void CloneStream::next(VecXd& x, int& y) {
  const auto ci = static_cast<std::size_t>(rng_.below(uint64_t(model_.components.size())));
  const CloneComponent& comp = model_.components[ci];
  for (Index i = 0; i < model_.dim; ++i) z_[i] = rng_.normal();
  if (model_.mode == CloneMode::iso)
    x = comp.mean + sigmas_[ci] * z_;
  else
    x.noalias() = comp.mean + chols_[ci].triangularView<Eigen::Lower>() * z_;
  if (model_.clip) x = x.cwiseMax(model_.clip_lo).cwiseMin(model_.clip_hi);
  y = comp.label;
}

CloneValidation validate_clone(const CloneModel& model, Index n_per_component, uint64_t seed) {
  if (n_per_component < 1024)
    throw std::invalid_argument("validate_clone: need at least 1024 samples per component");
  if (model.components.empty())
    throw std::invalid_argument("validate_clone: model has no components");

  constexpr Index kProjections = 64;
  constexpr Index kChunk = 2048;
  const Index d = model.dim;

  // fixed random probe directions; the covariance check compares projected
  // variances, which stays sharp at any dimension
  MatXd projections(d, kProjections);
  {
    Rng prng(mix_seed(seed, 0x70726f6aull));
    for (Index j = 0; j < kProjections; ++j) {
      for (Index i = 0; i < d; ++i) projections(i, j) = prng.normal();
      projections.col(j).normalize();
    }
  }

  CloneValidation v{0.0, 0.0, false, false, 0.0, n_per_component};
  Index band_checks = 0, band_hits = 0;

  MatXd chunk(kChunk, d);
  for (std::size_t ci = 0; ci < model.components.size(); ++ci) {
    const CloneComponent& comp = model.components[static_cast<std::size_t>(ci)];
    const PreparedComponent p = prepare(model, comp);
    Rng rng(mix_seed(seed, 0x76616c6964ull, static_cast<uint64_t>(ci)));

    VecXd sum = VecXd::Zero(d);
    VecXd proj_sum = VecXd::Zero(kProjections);
    VecXd proj_sq = VecXd::Zero(kProjections);
    Index done = 0;
    while (done < n_per_component) {
      const Index rows = std::min(kChunk, n_per_component - done);
      if (rows != chunk.rows()) chunk.resize(rows, d);
      draw_rows(model, p, rng, chunk);
      sum += chunk.colwise().sum().transpose();
      const MatXd pr = chunk * projections;  // rows x kProjections
      proj_sum += pr.colwise().sum().transpose();
      proj_sq += pr.array().square().colwise().sum().matrix().transpose();
      done += rows;
    }

    const double n = double(n_per_component);
    const VecXd mean = sum / n;
    const MatXd model_cov = model.mode == CloneMode::iso
                                ? MatXd(comp.iso_variance * MatXd::Identity(d, d))
                                : comp.covariance;
    const double scale = std::sqrt(model_cov.trace() / double(d));
    v.max_mean_err = std::max(v.max_mean_err, (mean - comp.mean).cwiseAbs().maxCoeff() / scale);

    for (Index j = 0; j < kProjections; ++j) {
      const double m = proj_sum[j] / n;
      const double var = proj_sq[j] / n - m * m;
      const double want = projections.col(j).dot(model_cov * projections.col(j));
      v.max_cov_err = std::max(v.max_cov_err, std::abs(var - want) / want);
    }

    if (!model.clip) {
      for (Index i = 0; i < d; ++i) {
        const double se = std::sqrt(model_cov(i, i) / n);
        band_checks += 1;
        band_hits += std::abs(mean[i] - comp.mean[i]) > 3.0 * se;
      }
    }
  }
  v.mean_ok = v.max_mean_err <= 0.02;
  v.cov_ok = v.max_cov_err <= 0.10;
  v.band_violation_fraction = band_checks ? double(band_hits) / double(band_checks) : 0.0;
  return v;
}

}  // namespace momentlab
