#pragma once

// Raw moments kappa^{ij..} and cumulants kappa^{i,j,..} through order 4, with
// the exact conversion in both directions. The conversion coefficients are the
// Moebius numbers (-1)^{b-1}(b-1)! over set partitions; at order 4 that gives
//   k^{i,j,k,l} = m^{ijkl} - m^i m^{jkl}[4] - m^{ij}m^{kl}[3]
//                 + 2 m^i m^j m^{kl}[6] - 6 m^i m^j m^k m^l
// (with lower orders already converted), and the inverse sums cumulant
// products over all partitions.

#include <stdexcept>

#include "momentlab/tensor.hpp"
#include "momentlab/types.hpp"

namespace momentlab {

template <typename S>
struct MomentSet {
  Vec<S> m1;
  Mat<S> m2;
  Sym3<S> m3;
  Sym4<S> m4;

  Index dim() const { return m1.size(); }
};

template <typename S>
struct CumulantSet {
  Vec<S> k1;
  Mat<S> k2;
  Sym3<S> k3;
  Sym4<S> k4;

  Index dim() const { return k1.size(); }
};

namespace detail {
template <typename Set>
void check_set_dims(const Set& s, Index d3, Index d4, const char* what) {
  if (d3 != s.dim() || d4 != s.dim())
    throw std::invalid_argument(std::string(what) + ": orders carry mismatched dimensions");
}
}  // namespace detail

template <typename S>
MomentSet<S> moments_from_cumulants(const CumulantSet<S>& c) {
  detail::check_set_dims(c, c.k3.dim(), c.k4.dim(), "moments_from_cumulants");
  MomentSet<S> m;
  m.m1 = c.k1;
  m.m2 = c.k2 + c.k1 * c.k1.transpose();

  m.m3 = c.k3;
  m.m3 += bracket_sum(c.k1, c.k2);
  m.m3 += outer3(c.k1);

  m.m4 = c.k4;
  m.m4 += bracket_sum(c.k1, c.k3);
  m.m4 += bracket_sum(c.k2);
  m.m4 += bracket_sum2(c.k1, c.k2);
  m.m4 += outer4(c.k1);
  return m;
}

template <typename S>
CumulantSet<S> cumulants_from_moments(const MomentSet<S>& m) {
  detail::check_set_dims(m, m.m3.dim(), m.m4.dim(), "cumulants_from_moments");
  CumulantSet<S> c;
  c.k1 = m.m1;
  c.k2 = m.m2 - m.m1 * m.m1.transpose();

  c.k3 = m.m3;
  {
    Sym3<S> t = bracket_sum(m.m1, m.m2);
    t *= S(-1);
    c.k3 += t;
    t = outer3(m.m1);
    t *= S(2);
    c.k3 += t;
  }

  c.k4 = m.m4;
  {
    Sym4<S> t = bracket_sum(m.m1, m.m3);
    t *= S(-1);
    c.k4 += t;
    t = bracket_sum(m.m2);
    t *= S(-1);
    c.k4 += t;
    t = bracket_sum2(m.m1, m.m2);
    t *= S(2);
    c.k4 += t;
    t = outer4(m.m1);
    t *= S(-6);
    c.k4 += t;
  }
  return c;
}

}  // namespace momentlab
