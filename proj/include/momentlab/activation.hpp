#pragma once

// Odd sigmoidal activations and their Maclaurin data. The truncated dynamics
// only ever needs the normalized coefficients beta_k = sigma^(k)(0)/k!, the
// rescaled beta~_k = k beta_k (from sigma'), and the product coefficients
// gamma_k of sigma sigma', gamma_k = sum_{m+n=k} beta_m beta~_{n+1}.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace momentlab {

enum class Activation { tanh_sigmoid, erf_sigmoid };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::tanh_sigmoid: return "tanh";
    case Activation::erf_sigmoid: return "erf";
  }
  throw std::logic_error("unknown activation");
}

inline Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::tanh_sigmoid;
  if (name == "erf") return Activation::erf_sigmoid;
  throw std::invalid_argument("unknown activation '" + name + "' (expected tanh or erf)");
}

inline double activation_value(Activation a, double x) {
  switch (a) {
    case Activation::tanh_sigmoid:
      return std::tanh(x);
    case Activation::erf_sigmoid:
      return std::erf(x / std::sqrt(2.0));
  }
  throw std::logic_error("unknown activation");
}

inline double activation_derivative(Activation a, double x) {
  switch (a) {
    case Activation::tanh_sigmoid: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::erf_sigmoid:
      return std::sqrt(2.0 / 3.14159265358979323846) * std::exp(-0.5 * x * x);
  }
  throw std::logic_error("unknown activation");
}

class ActivationExpansion {
 public:
  // beta[k] is the coefficient of lambda^k in sigma
  explicit ActivationExpansion(std::vector<double> beta) : beta_(std::move(beta)) {
    if (beta_.empty()) throw std::invalid_argument("expansion needs at least one coefficient");
  }

  static ActivationExpansion of(Activation a, int max_order) {
    // coefficients through lambda^9; the dynamics uses orders <= 4
    if (max_order + 2 > 10)
      throw std::invalid_argument("activation expansion tabulated through order 9 only");
    std::vector<double> beta(static_cast<std::size_t>(max_order) + 2, 0.0);
    switch (a) {
      case Activation::tanh_sigmoid: {
        const double odd[5] = {1.0, -1.0 / 3.0, 2.0 / 15.0, -17.0 / 315.0, 62.0 / 2835.0};
        for (std::size_t n = 0; 2 * n + 1 < beta.size() && n < 5; ++n) beta[2 * n + 1] = odd[n];
        break;
      }
      case Activation::erf_sigmoid: {
        const double c = std::sqrt(2.0 / 3.14159265358979323846);
        const double odd[5] = {1.0, -1.0 / 6.0, 1.0 / 40.0, -1.0 / 336.0, 1.0 / 3456.0};
        for (std::size_t n = 0; 2 * n + 1 < beta.size() && n < 5; ++n) beta[2 * n + 1] = c * odd[n];
        break;
      }
    }
    return ActivationExpansion(std::move(beta));
  }

  // largest k for which both beta~_{k+1} and gamma_k are available
  int max_order() const { return static_cast<int>(beta_.size()) - 2; }

  double beta(int k) const {
    if (k < 0 || static_cast<std::size_t>(k) >= beta_.size())
      throw std::out_of_range("expansion order " + std::to_string(k) + " not tabulated");
    return beta_[static_cast<std::size_t>(k)];
  }

  double beta_tilde(int k) const { return k * beta(k); }

  double gamma(int k) const {
    if (k < 0 || k > max_order())
      throw std::out_of_range("product coefficient " + std::to_string(k) + " not tabulated");
    double g = 0.0;
    for (int m = 0; m <= k; ++m) g += beta(m) * beta_tilde(k - m + 1);
    return g;
  }

  // partial sum through lambda^order, for truncation diagnostics
  double truncated_value(double lambda, int order) const {
    double acc = 0.0, pow = 1.0;
    for (int k = 0; k <= order; ++k, pow *= lambda) acc += beta(k) * pow;
    return acc;
  }

 private:
  std::vector<double> beta_;
};

}  // namespace momentlab
