#pragma once

// Dense symmetric tensors of order 3 and 4, plus the bracket sums
// v^i M^{jk} [3], v^i T^{jkl} [4], M^{ij} M^{kl} [3] and v^i v^j M^{kl} [6]
// that appear in moment/cumulant conversion identities. A bracket [k] sums a
// product of factors over the k distinct partitions of the index set into the
// factors' shapes; repeated shapes always refer to the same factor here.

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "momentlab/types.hpp"

namespace momentlab {

// Dense order-3/order-4 tensors are memory hogs (D^4 doubles), so their
// dimension is capped; estimators above the cap must use contracted forms.
inline constexpr Index kDenseTensorDimCap = 64;

namespace detail {
inline void check_dense_dim(Index dim, Index cap) {
  if (dim < 1) throw std::invalid_argument("tensor dimension must be positive");
  if (dim > cap)
    throw std::invalid_argument("dense tensor dimension " + std::to_string(dim) +
                                " exceeds cap " + std::to_string(cap) +
                                "; use contracted estimators instead");
}
}  // namespace detail

template <typename S>
class Sym3 {
 public:
  Sym3() = default;
  explicit Sym3(Index dim, Index cap = kDenseTensorDimCap) : dim_(dim) {
    detail::check_dense_dim(dim, cap);
    a_.assign(static_cast<std::size_t>(dim) * dim * dim, S(0));
  }

  Index dim() const { return dim_; }

  S& operator()(Index i, Index j, Index k) { return a_[idx(i, j, k)]; }
  S operator()(Index i, Index j, Index k) const { return a_[idx(i, j, k)]; }

  Sym3& operator+=(const Sym3& o) {
    for (std::size_t t = 0; t < a_.size(); ++t) a_[t] += o.a_[t];
    return *this;
  }
  Sym3& operator*=(S c) {
    for (auto& v : a_) v *= c;
    return *this;
  }

  // T^{ijk} v_j v_k
  Vec<S> contract2(const Vec<S>& v) const {
    Vec<S> out = Vec<S>::Zero(dim_);
    for (Index i = 0; i < dim_; ++i) {
      S acc(0);
      for (Index j = 0; j < dim_; ++j) {
        S inner(0);
        for (Index k = 0; k < dim_; ++k) inner += (*this)(i, j, k) * v[k];
        acc += inner * v[j];
      }
      out[i] = acc;
    }
    return out;
  }

  S max_abs() const {
    S m(0);
    for (const auto& v : a_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  std::size_t idx(Index i, Index j, Index k) const {
    return (static_cast<std::size_t>(i) * dim_ + j) * dim_ + k;
  }
  Index dim_ = 0;
  std::vector<S> a_;
};

template <typename S>
class Sym4 {
 public:
  Sym4() = default;
  explicit Sym4(Index dim, Index cap = kDenseTensorDimCap) : dim_(dim) {
    detail::check_dense_dim(dim, cap);
    a_.assign(static_cast<std::size_t>(dim) * dim * dim * dim, S(0));
  }

  Index dim() const { return dim_; }

  S& operator()(Index i, Index j, Index k, Index l) { return a_[idx(i, j, k, l)]; }
  S operator()(Index i, Index j, Index k, Index l) const { return a_[idx(i, j, k, l)]; }

  Sym4& operator+=(const Sym4& o) {
    for (std::size_t t = 0; t < a_.size(); ++t) a_[t] += o.a_[t];
    return *this;
  }
  Sym4& operator*=(S c) {
    for (auto& v : a_) v *= c;
    return *this;
  }

  // T^{ijkl} v_j v_k v_l
  Vec<S> contract3(const Vec<S>& v) const {
    Vec<S> out = Vec<S>::Zero(dim_);
    for (Index i = 0; i < dim_; ++i) {
      S acc(0);
      for (Index j = 0; j < dim_; ++j) {
        S accj(0);
        for (Index k = 0; k < dim_; ++k) {
          S inner(0);
          for (Index l = 0; l < dim_; ++l) inner += (*this)(i, j, k, l) * v[l];
          accj += inner * v[k];
        }
        acc += accj * v[j];
      }
      out[i] = acc;
    }
    return out;
  }

  S max_abs() const {
    S m(0);
    for (const auto& v : a_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  std::size_t idx(Index i, Index j, Index k, Index l) const {
    return ((static_cast<std::size_t>(i) * dim_ + j) * dim_ + k) * dim_ + l;
  }
  Index dim_ = 0;
  std::vector<S> a_;
};

// v^i v^j v^k
template <typename S>
Sym3<S> outer3(const Vec<S>& v) {
  Sym3<S> t(v.size());
  for (Index i = 0; i < v.size(); ++i)
    for (Index j = 0; j < v.size(); ++j)
      for (Index k = 0; k < v.size(); ++k) t(i, j, k) = v[i] * v[j] * v[k];
  return t;
}

// v^i v^j v^k v^l
template <typename S>
Sym4<S> outer4(const Vec<S>& v) {
  Sym4<S> t(v.size());
  for (Index i = 0; i < v.size(); ++i)
    for (Index j = 0; j < v.size(); ++j)
      for (Index k = 0; k < v.size(); ++k)
        for (Index l = 0; l < v.size(); ++l) t(i, j, k, l) = v[i] * v[j] * v[k] * v[l];
  return t;
}

// v^i M^{jk} [3]: the 3 distinct ways to split {i,j,k} into a singleton and a pair.
template <typename S>
Sym3<S> bracket_sum(const Vec<S>& v, const Mat<S>& m) {
  if (v.size() != m.rows() || m.rows() != m.cols())
    throw std::invalid_argument("bracket_sum: factor dimensions disagree");
  Sym3<S> t(v.size());
  for (Index i = 0; i < v.size(); ++i)
    for (Index j = 0; j < v.size(); ++j)
      for (Index k = 0; k < v.size(); ++k)
        t(i, j, k) = v[i] * m(j, k) + v[j] * m(i, k) + v[k] * m(i, j);
  return t;
}

// v^i T^{jkl} [4]
template <typename S>
Sym4<S> bracket_sum(const Vec<S>& v, const Sym3<S>& t3) {
  if (v.size() != t3.dim()) throw std::invalid_argument("bracket_sum: factor dimensions disagree");
  Sym4<S> t(v.size());
  for (Index i = 0; i < v.size(); ++i)
    for (Index j = 0; j < v.size(); ++j)
      for (Index k = 0; k < v.size(); ++k)
        for (Index l = 0; l < v.size(); ++l)
          t(i, j, k, l) = v[i] * t3(j, k, l) + v[j] * t3(i, k, l) + v[k] * t3(i, j, l) +
                          v[l] * t3(i, j, k);
  return t;
}

// M^{ij} M^{kl} [3]: one symmetric matrix used as both pair factors.
template <typename S>
Sym4<S> bracket_sum(const Mat<S>& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("bracket_sum: matrix factor must be square");
  Sym4<S> t(m.rows());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.rows(); ++j)
      for (Index k = 0; k < m.rows(); ++k)
        for (Index l = 0; l < m.rows(); ++l)
          t(i, j, k, l) = m(i, j) * m(k, l) + m(i, k) * m(j, l) + m(i, l) * m(j, k);
  return t;
}

// v^i v^j M^{kl} [6]: the 6 distinct choices of which index pair carries M.
template <typename S>
Sym4<S> bracket_sum2(const Vec<S>& v, const Mat<S>& m) {
  if (v.size() != m.rows() || m.rows() != m.cols())
    throw std::invalid_argument("bracket_sum2: factor dimensions disagree");
  Sym4<S> t(v.size());
  for (Index i = 0; i < v.size(); ++i)
    for (Index j = 0; j < v.size(); ++j)
      for (Index k = 0; k < v.size(); ++k)
        for (Index l = 0; l < v.size(); ++l)
          t(i, j, k, l) = v[i] * v[j] * m(k, l) + v[i] * v[k] * m(j, l) + v[i] * v[l] * m(j, k) +
                          v[j] * v[k] * m(i, l) + v[j] * v[l] * m(i, k) + v[k] * v[l] * m(i, j);
  return t;
}

}  // namespace momentlab
