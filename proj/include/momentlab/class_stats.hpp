#pragma once

// Per-class and pooled statistics of a binary dataset, in the conventions the
// classifier formulas assume:
//   * everything is computed after removing the pooled mean;
//   * class_covariances are unbiased (1/(n_c - 1));
//   * within_class_covariance is the SUM over the two classes of the plug-in
//     (1/n_c) centered second moments, and pooled_second_moment is the plug-in
//     second moment of the pooled centered data, so that on balanced data
//     pooled = within/2 + (m/2)(m/2)^T holds exactly;
//   * mean_difference m = mean(+1 class) - mean(-1 class).

#include <array>

#include "momentlab/dataset.hpp"
#include "momentlab/moments.hpp"
#include "momentlab/types.hpp"

namespace momentlab {

struct ClassStats {
  VecXd pooled_mean;                       // raw coordinates
  std::array<VecXd, 2> class_means;        // pooled-centered; [0] = label -1, [1] = label +1
  std::array<MatXd, 2> class_covariances;  // unbiased
  std::array<Index, 2> counts;
  VecXd mean_difference;
  MatXd pooled_second_moment;
  MatXd within_class_covariance;

  Index dim() const { return pooled_mean.size(); }
};

// Throws on an empty class, labels outside {-1,+1}, or fewer than two samples
// in a class (the unbiased covariance needs n_c >= 2).
ClassStats estimate_class_stats(const LabeledDataset& data);

// Which fourth-order statistic a contraction uses. The within-class cumulant
// is the principled choice for non-Gaussian corrections; the other three keep
// either the mixture mean structure (full) or the Gaussian part (moment) in
// the tensor, which makes them natural controls.
enum class FourthOrderStat { within_cumulant, within_moment, full_cumulant, full_moment };

const char* to_string(FourthOrderStat s);
FourthOrderStat fourth_order_stat_from_string(const std::string& name);

// u_i = T^{i,jkl} v_j v_k v_l for the selected statistic. Streaming, free of
// any dense order-4 tensor, so it works at any dimension. "within" variants
// center per class, "full" variants only on the pooled mean; cumulant
// variants subtract the plug-in Wick part.
VecXd contract_fourth_order(const LabeledDataset& data, const ClassStats& stats, const VecXd& v,
                            FourthOrderStat stat);

// u_i = kappa_w^{i,jkl} v_j v_k v_l, where kappa_w is the sum over classes of
// the plug-in fourth cumulant of the class-centered data.
VecXd contract_within_class_fourth_cumulant(const LabeledDataset& data, const ClassStats& stats,
                                            const VecXd& v);

// Plug-in moment estimate of the rows of `x` (no centering applied here).
// Dense order-4 storage, so dim is capped.
MomentSet<double> estimate_moments(const MatXd& x, Index cap = kDenseTensorDimCap);

// Sum over classes of the plug-in cumulants of class-centered data; the dense
// counterpart of the streaming contraction, used as its cross-check and for
// small-dimension diagnostics.
CumulantSet<double> within_class_cumulants_dense(const LabeledDataset& data,
                                                 const ClassStats& stats,
                                                 Index cap = kDenseTensorDimCap);

}  // namespace momentlab
