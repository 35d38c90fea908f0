#include "momentlab/class_stats.hpp"

#include <string>

namespace momentlab {

namespace {

constexpr Index kBlockRows = 4096;

std::array<std::vector<Index>, 2> split_rows(const LabeledDataset& data, const char* what) {
  check_dataset(data, what);
  std::array<std::vector<Index>, 2> rows;
  for (Index r = 0; r < data.size(); ++r) {
    int y = data.labels[r];
    if (y != -1 && y != 1)
      throw std::invalid_argument(std::string(what) + ": labels must be -1 or +1, got " +
                                  std::to_string(y));
    rows[y == 1 ? 1 : 0].push_back(r);
  }
  for (int c = 0; c < 2; ++c)
    if (rows[c].size() < 2)
      throw std::invalid_argument(std::string(what) + ": class " + (c ? "+1" : "-1") +
                                  " has fewer than two samples");
  return rows;
}

MatXd gather_centered(const LabeledDataset& data, const std::vector<Index>& rows,
                      const VecXd& center) {
  MatXd out(static_cast<Index>(rows.size()), data.dim());
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.row(static_cast<Index>(r)) = data.inputs.row(rows[r]) - center.transpose();
  return out;
}

}  // namespace

ClassStats estimate_class_stats(const LabeledDataset& data) {
  const auto rows = split_rows(data, "estimate_class_stats");
  ClassStats s;
  s.pooled_mean = data.inputs.colwise().mean().transpose();

  const Index d = data.dim();
  s.pooled_second_moment = MatXd::Zero(d, d);
  s.within_class_covariance = MatXd::Zero(d, d);
  for (int c = 0; c < 2; ++c) {
    const MatXd tilde = gather_centered(data, rows[c], s.pooled_mean);
    const Index nc = tilde.rows();
    s.counts[c] = nc;
    s.class_means[c] = tilde.colwise().mean().transpose();
    const MatXd centered = tilde.rowwise() - s.class_means[c].transpose();
    const MatXd scatter = centered.adjoint() * centered;
    s.class_covariances[c] = scatter / double(nc - 1);
    s.within_class_covariance += scatter / double(nc);
    s.pooled_second_moment += tilde.adjoint() * tilde;
  }
  s.pooled_second_moment /= double(data.size());
  s.mean_difference = s.class_means[1] - s.class_means[0];
  return s;
}

const char* to_string(FourthOrderStat s) {
  switch (s) {
    case FourthOrderStat::within_cumulant: return "within_cumulant";
    case FourthOrderStat::within_moment: return "within_moment";
    case FourthOrderStat::full_cumulant: return "full_cumulant";
    case FourthOrderStat::full_moment: return "full_moment";
  }
  throw std::logic_error("unknown fourth-order statistic");
}

FourthOrderStat fourth_order_stat_from_string(const std::string& name) {
  for (auto s : {FourthOrderStat::within_cumulant, FourthOrderStat::within_moment,
                 FourthOrderStat::full_cumulant, FourthOrderStat::full_moment})
    if (name == to_string(s)) return s;
  throw std::invalid_argument("unknown fourth-order statistic '" + name + "'");
}

namespace {

struct ContractionSums {
  VecXd a;    // sum of x (x.v)^3
  VecXd b;    // sum of x (x.v)
  double s2;  // sum of (x.v)^2
  double n;
};

ContractionSums accumulate_contraction(const LabeledDataset& data, const std::vector<Index>& rows,
                                       const VecXd& center, const VecXd& v) {
  ContractionSums out{VecXd::Zero(data.dim()), VecXd::Zero(data.dim()), 0.0, double(rows.size())};
  VecXd xt(data.dim());
  for (Index r : rows) {
    xt = data.inputs.row(r).transpose() - center;
    const double lam = xt.dot(v);
    out.a += xt * (lam * lam * lam);
    out.b += xt * lam;
    out.s2 += lam * lam;
  }
  return out;
}

}  // namespace

VecXd contract_fourth_order(const LabeledDataset& data, const ClassStats& stats, const VecXd& v,
                            FourthOrderStat stat) {
  const auto rows = split_rows(data, "contract_fourth_order");
  if (v.size() != data.dim())
    throw std::invalid_argument("contract_fourth_order: direction dimension mismatch");

  const bool within =
      stat == FourthOrderStat::within_cumulant || stat == FourthOrderStat::within_moment;
  const bool cumulant =
      stat == FourthOrderStat::within_cumulant || stat == FourthOrderStat::full_cumulant;

  VecXd u = VecXd::Zero(data.dim());
  if (within) {
    for (int c = 0; c < 2; ++c) {
      const VecXd center = stats.pooled_mean + stats.class_means[c];
      const ContractionSums s = accumulate_contraction(data, rows[c], center, v);
      u += s.a / s.n;
      // plug-in Wick subtraction: 3 (Sigma v)_i (v^T Sigma v) with Sigma = scatter/n
      if (cumulant) u -= 3.0 * (s.b / s.n) * (s.s2 / s.n);
    }
  } else {
    std::vector<Index> all(static_cast<std::size_t>(data.size()));
    for (Index r = 0; r < data.size(); ++r) all[static_cast<std::size_t>(r)] = r;
    const ContractionSums s = accumulate_contraction(data, all, stats.pooled_mean, v);
    u = s.a / s.n;
    if (cumulant) u -= 3.0 * (s.b / s.n) * (s.s2 / s.n);
  }
  return u;
}

VecXd contract_within_class_fourth_cumulant(const LabeledDataset& data, const ClassStats& stats,
                                            const VecXd& v) {
  return contract_fourth_order(data, stats, v, FourthOrderStat::within_cumulant);
}

MomentSet<double> estimate_moments(const MatXd& x, Index cap) {
  if (x.rows() == 0) throw std::invalid_argument("estimate_moments: no samples");
  const Index n = x.rows();
  const Index d = x.cols();

  MomentSet<double> m;
  m.m1 = x.colwise().mean().transpose();
  m.m2 = (x.adjoint() * x) / double(n);
  m.m3 = Sym3<double>(d, cap);
  m.m4 = Sym4<double>(d, cap);

  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  // Flat Sym3 storage is a row-major d x d^2 matrix, Sym4 a d^2 x d^2 one;
  // accumulating Kronecker rows block-wise turns the moment sums into GEMMs.
  Eigen::Map<RowMat> t3(&m.m3(0, 0, 0), d, d * d);
  Eigen::Map<RowMat> t4(&m.m4(0, 0, 0, 0), d * d, d * d);

  RowMat block(std::min(kBlockRows, n), d * d);
  for (Index start = 0; start < n; start += kBlockRows) {
    const Index rows = std::min(kBlockRows, n - start);
    for (Index r = 0; r < rows; ++r) {
      const auto xi = x.row(start + r);
      for (Index i = 0; i < d; ++i) block.row(r).segment(i * d, d) = xi[i] * xi;
    }
    const auto vb = block.topRows(rows);
    t3.noalias() += x.middleRows(start, rows).adjoint() * vb;
    t4.noalias() += vb.adjoint() * vb;
  }
  m.m3 *= 1.0 / double(n);
  m.m4 *= 1.0 / double(n);
  return m;
}

CumulantSet<double> within_class_cumulants_dense(const LabeledDataset& data,
                                                 const ClassStats& stats, Index cap) {
  const auto rows = split_rows(data, "within_class_cumulants_dense");
  const Index d = data.dim();
  CumulantSet<double> acc;
  acc.k1 = VecXd::Zero(d);
  acc.k2 = MatXd::Zero(d, d);
  acc.k3 = Sym3<double>(d, cap);
  acc.k4 = Sym4<double>(d, cap);
  for (int c = 0; c < 2; ++c) {
    const VecXd center = stats.pooled_mean + stats.class_means[c];
    const MatXd centered = gather_centered(data, rows[c], center);
    const CumulantSet<double> kc = cumulants_from_moments(estimate_moments(centered, cap));
    acc.k2 += kc.k2;
    acc.k3 += kc.k3;
    acc.k4 += kc.k4;
  }
  return acc;
}

}  // namespace momentlab
