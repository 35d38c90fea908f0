#pragma once

#include <stdexcept>

#include "momentlab/types.hpp"

namespace momentlab {

// Rows of `inputs` are samples. Binary tasks use labels in {-1, +1}; image
// multiclass tasks use 0-based class ids. Helpers that require one convention
// check it and throw.
struct LabeledDataset {
  MatXd inputs;
  Eigen::VectorXi labels;

  Index size() const { return inputs.rows(); }
  Index dim() const { return inputs.cols(); }
};

inline void check_dataset(const LabeledDataset& d, const char* what) {
  if (d.inputs.rows() != d.labels.size())
    throw std::invalid_argument(std::string(what) + ": label count does not match sample count");
  if (d.inputs.rows() == 0)
    throw std::invalid_argument(std::string(what) + ": dataset is empty");
}

}  // namespace momentlab
