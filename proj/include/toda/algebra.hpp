#pragma once

#include "toda/ratfunc.hpp"

namespace toda {

/// Exact scalar: rational function of the coupling and any formal parameters.
using Scalar = RatFunc;

template <class F>
struct FieldOps;

template <>
struct FieldOps<Scalar> {
  static Scalar from_rat(const Rat& r) { return Scalar::constant(r); }
};

template <>
struct FieldOps<double> {
  static double from_rat(const Rat& r) { return r.convert_to<double>(); }
};

/// Weight of sl3 in simple-root coordinates: w = a1*e1 + a2*e2, over any
/// coefficient field F (exact scalars for the symbolic engine, doubles for
/// the numeric one). The Gram matrix of (e1, e2) is the Cartan matrix
/// [[2,-1],[-1,2]].
template <class F>
struct WeightT {
  F a1{};
  F a2{};

  WeightT operator+(const WeightT& o) const { return {a1 + o.a1, a2 + o.a2}; }
  WeightT operator-(const WeightT& o) const { return {a1 - o.a1, a2 - o.a2}; }
  WeightT operator-() const { return {-a1, -a2}; }
  WeightT scaled(const F& c) const { return {a1 * c, a2 * c}; }
  WeightT scaled(const Rat& c) const {
    F f = FieldOps<F>::from_rat(c);
    return {a1 * f, a2 * f};
  }
};

using Weight = WeightT<Scalar>;

template <class F>
F inner(const WeightT<F>& u, const WeightT<F>& v) {
  F two = FieldOps<F>::from_rat(Rat(2));
  return two * (u.a1 * v.a1 + u.a2 * v.a2) - u.a1 * v.a2 - u.a2 * v.a1;
}

/// h_1 = omega_1, h_2 = omega_2 - omega_1, h_3 = -omega_2, acting by the
/// inner product; in simple-root coordinates these are the linear maps below.
/// They sum to zero.
template <class F>
F h(int i, const WeightT<F>& u) {
  switch (i) {
    case 1: return u.a1;
    case 2: return u.a2 - u.a1;
    case 3: return -u.a2;
    default: throw std::invalid_argument("h: index must be 1, 2 or 3");
  }
}

/// Antisymmetrized two-form entering the spin-3 descendants.
template <class F>
F bform(const WeightT<F>& u, const WeightT<F>& v) {
  return (h(2, u) - h(1, u)) * h(1, v) + (h(3, u) - h(2, u)) * h(3, v);
}

/// Cyclic three-form; csigma symmetrizes its last two slots.
template <class F>
F cform(const WeightT<F>& u, const WeightT<F>& v, const WeightT<F>& w) {
  return h(1, u) * h(2, v) * h(3, w) + h(1, v) * h(2, w) * h(3, u) +
         h(1, w) * h(2, u) * h(3, v);
}

template <class F>
F csigma(const WeightT<F>& u, const WeightT<F>& v, const WeightT<F>& w) {
  return cform(u, v, w) + cform(u, w, v);
}

template <class F>
WeightT<F> simple_root(int i) {
  if (i == 1) return {FieldOps<F>::from_rat(1), FieldOps<F>::from_rat(0)};
  if (i == 2) return {FieldOps<F>::from_rat(0), FieldOps<F>::from_rat(1)};
  throw std::invalid_argument("simple_root: index must be 1 or 2");
}

template <class F>
WeightT<F> fundamental_weight(int i) {
  if (i == 1) return {FieldOps<F>::from_rat(Rat(2, 3)), FieldOps<F>::from_rat(Rat(1, 3))};
  if (i == 2) return {FieldOps<F>::from_rat(Rat(1, 3)), FieldOps<F>::from_rat(Rat(2, 3))};
  throw std::invalid_argument("fundamental_weight: index must be 1 or 2");
}

template <class F>
WeightT<F> weyl_vector() {
  return {FieldOps<F>::from_rat(1), FieldOps<F>::from_rat(1)};
}

/// Dual pairs (e_i, omega_i): sum_i e_i (x) omega_i is the identity with
/// respect to the inner product; used to trace out contracted slots.
template <class F>
std::array<std::pair<WeightT<F>, WeightT<F>>, 2> dual_pairs() {
  return {std::make_pair(simple_root<F>(1), fundamental_weight<F>(1)),
          std::make_pair(simple_root<F>(2), fundamental_weight<F>(2))};
}

template <class F>
F q_constant(const F& gamma) {
  return gamma + FieldOps<F>::from_rat(2) / gamma;
}

template <class F>
WeightT<F> background_charge(const F& gamma) {
  return weyl_vector<F>().scaled(q_constant(gamma));
}

/// Conformal weight candidate <a/2, Q - a/2>; the Ward module re-derives it
/// independently from pole coefficients and cross-checks.
template <class F>
F delta_alpha(const WeightT<F>& a, const F& gamma) {
  WeightT<F> half = a.scaled(Rat(1, 2));
  return inner(half, background_charge(gamma) - half);
}

/// Spin-3 weight candidate -q^2 h2(a) + (q/2) B(a,a) + (1/3) C(a,a,a); also
/// re-derived by the Ward module.
template <class F>
F w_alpha(const WeightT<F>& a, const F& gamma) {
  F q = q_constant(gamma);
  F half = FieldOps<F>::from_rat(Rat(1, 2));
  F third = FieldOps<F>::from_rat(Rat(1, 3));
  return -(q * q * h(2, a)) + q * half * bform(a, a) + third * cform(a, a, a);
}

inline Scalar scalar_gamma(VarId gamma) { return Scalar::var(gamma); }

}  // namespace toda
