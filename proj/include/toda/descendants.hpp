#pragma once

#include <functional>
#include <vector>

#include "toda/algebra.hpp"

namespace toda {

/// One multilinear form evaluation whose arguments are fixed weights or
/// derivative slots V_p := d^p Phi / (p-1)!. Descendant polynomials are
/// finite sums coeff * atom with slot degree at most three.
template <class F>
struct AtomT {
  enum class Kind { Unit, Inner, BForm, CForm };

  struct Arg {
    bool is_slot = false;
    WeightT<F> w{};
    int p = 0;

    static Arg slot(int order) {
      Arg a;
      a.is_slot = true;
      a.p = order;
      return a;
    }
    static Arg weight(WeightT<F> wt) {
      Arg a;
      a.w = std::move(wt);
      return a;
    }
  };

  Kind kind = Kind::Unit;
  std::vector<Arg> args;

  int slot_degree() const {
    int d = 0;
    for (const auto& a : args) d += a.is_slot ? 1 : 0;
    return d;
  }
  int max_slot_order() const {
    int m = 0;
    for (const auto& a : args)
      if (a.is_slot) m = std::max(m, a.p);
    return m;
  }
};

template <class F>
struct DescTermT {
  F coeff;
  AtomT<F> atom;
};

template <class F>
struct DescPolyT {
  std::vector<DescTermT<F>> terms;

  int slot_degree() const {
    int d = 0;
    for (const auto& t : terms) d = std::max(d, t.atom.slot_degree());
    return d;
  }
};

using DescPoly = DescPolyT<Scalar>;

namespace detail {
template <class F>
void push(DescPolyT<F>& p, F coeff, typename AtomT<F>::Kind kind,
          std::vector<typename AtomT<F>::Arg> args) {
  AtomT<F> a;
  a.kind = kind;
  a.args = std::move(args);
  p.terms.push_back({std::move(coeff), std::move(a)});
}
}  // namespace detail

/// L_{-n}^alpha in slot normalization. For n = 1 this is <alpha, V_1>; for
/// n >= 2 it is <(n-1)Q + alpha, V_n> - sum_{i=0}^{n-2} <V_{i+1}, V_{n-1-i}>.
/// The slot normalization V_p = d^p Phi/(p-1)! makes all structure constants
/// integers; the quadratic sum carries unit coefficients.
template <class F>
DescPolyT<F> virasoro_poly(int n, const WeightT<F>& alpha, const F& gamma) {
  if (n < 1) throw std::invalid_argument("virasoro_poly: level must be >= 1");
  using Atom = AtomT<F>;
  using Arg = typename Atom::Arg;
  DescPolyT<F> p;
  F one = FieldOps<F>::from_rat(1);
  if (n == 1) {
    detail::push(p, one, Atom::Kind::Inner, {Arg::weight(alpha), Arg::slot(1)});
    return p;
  }
  WeightT<F> lead = background_charge(gamma).scaled(Rat(n - 1)) + alpha;
  detail::push(p, one, Atom::Kind::Inner, {Arg::weight(lead), Arg::slot(n)});
  for (int i = 0; i <= n - 2; ++i)
    detail::push(p, -one, Atom::Kind::Inner, {Arg::slot(i + 1), Arg::slot(n - 1 - i)});
  return p;
}

/// W_{-n}^alpha in slot normalization. The n >= 2 branch is the general
/// five-line expression; specializing it to n = 1, 2 reproduces the low-level
/// formulas exactly (covered by tests), so a single branch handles n >= 2.
template <class F>
DescPolyT<F> w_poly(int n, const WeightT<F>& alpha, const F& gamma) {
  if (n < 1) throw std::invalid_argument("w_poly: level must be >= 1");
  using Atom = AtomT<F>;
  using Arg = typename Atom::Arg;
  DescPolyT<F> p;
  F q = q_constant(gamma);
  F one = FieldOps<F>::from_rat(1);
  F two = FieldOps<F>::from_rat(2);
  if (n == 1) {
    detail::push(p, -q, Atom::Kind::BForm, {Arg::weight(alpha), Arg::slot(1)});
    detail::push(p, -two, Atom::Kind::CForm,
                 {Arg::weight(alpha), Arg::weight(alpha), Arg::slot(1)});
    return p;
  }
  // h2 acts by the inner product with the weight (-1/3, 1/3).
  WeightT<F> h2w{FieldOps<F>::from_rat(Rat(-1, 3)), FieldOps<F>::from_rat(Rat(1, 3))};
  if (n >= 3) {
    F c = q * q * FieldOps<F>::from_rat(Rat((n - 1) * (n - 2)));
    detail::push(p, std::move(c), Atom::Kind::Inner, {Arg::weight(h2w), Arg::slot(n)});
  }
  detail::push(p, q * FieldOps<F>::from_rat(Rat(n - 1)), Atom::Kind::BForm,
               {Arg::slot(n), Arg::weight(alpha)});
  detail::push(p, -q, Atom::Kind::BForm, {Arg::weight(alpha), Arg::slot(n)});
  detail::push(p, -two, Atom::Kind::CForm,
               {Arg::weight(alpha), Arg::weight(alpha), Arg::slot(n)});
  for (int i = 0; i <= n - 2; ++i) {
    detail::push(p, FieldOps<F>::from_rat(4), Atom::Kind::CForm,
                 {Arg::slot(i + 1), Arg::slot(n - 1 - i), Arg::weight(alpha)});
    if (i > 0)
      detail::push(p, -q * FieldOps<F>::from_rat(Rat(2 * i)), Atom::Kind::BForm,
                   {Arg::slot(i + 1), Arg::slot(n - 1 - i)});
  }
  for (int i = 0; i <= n - 3; ++i)
    for (int j = 0; j <= i; ++j)
      detail::push(p, FieldOps<F>::from_rat(Rat(-8, 3)), Atom::Kind::CForm,
                   {Arg::slot(j + 1), Arg::slot(i - j + 1), Arg::slot(n - i - 2)});
  return p;
}

/// Stress tensor and spin-3 current as level-2 / level-3 descendants of the
/// identity (zero weight).
template <class F>
DescPolyT<F> stress_tensor(const F& gamma) {
  return virasoro_poly(2, WeightT<F>{}, gamma);
}
template <class F>
DescPolyT<F> spin3_current(const F& gamma) {
  return w_poly(3, WeightT<F>{}, gamma);
}

/// Evaluate one atom with slots substituted by slot_value(p) (multilinear in
/// all arguments; used both by the free-field engine with rational sections
/// and by the lattice engine with numeric vectors).
template <class F, class SlotFn>
F eval_atom(const AtomT<F>& atom, SlotFn&& slot_value) {
  auto argval = [&](std::size_t i) -> WeightT<F> {
    const auto& a = atom.args.at(i);
    return a.is_slot ? slot_value(a.p) : a.w;
  };
  switch (atom.kind) {
    case AtomT<F>::Kind::Unit:
      return FieldOps<F>::from_rat(1);
    case AtomT<F>::Kind::Inner:
      return inner(argval(0), argval(1));
    case AtomT<F>::Kind::BForm:
      return bform(argval(0), argval(1));
    case AtomT<F>::Kind::CForm:
      return cform(argval(0), argval(1), argval(2));
  }
  throw std::logic_error("eval_atom: unknown atom kind");
}

template <class F, class SlotFn>
F eval_poly(const DescPolyT<F>& p, SlotFn&& slot_value) {
  F acc{};
  for (const auto& t : p.terms) acc = acc + t.coeff * eval_atom(t.atom, slot_value);
  return acc;
}

namespace detail {
/// Replace the slot pair (i, j) of an atom by the dual pairs (e_k, omega_k)
/// and sum; this is the trace that a Wick contraction of two vector-valued
/// slots produces.
template <class F>
std::vector<AtomT<F>> contract_pair(const AtomT<F>& atom, std::size_t i, std::size_t j) {
  std::vector<AtomT<F>> out;
  for (const auto& [e, w] : dual_pairs<F>()) {
    AtomT<F> a = atom;
    a.args[i] = AtomT<F>::Arg::weight(e);
    a.args[j] = AtomT<F>::Arg::weight(w);
    out.push_back(std::move(a));
  }
  return out;
}
}  // namespace detail

/// Expand a Wick-ordered descendant polynomial into raw monomials:
/// :xy: = xy - E[xy] and :xyz: = xyz - xE[yz] - yE[zx] - zE[xy]. cov(p, q)
/// supplies E[V_p V_q] for the scalar component field; the vector-valued
/// pairing is cov(p, q) times the inner-product trace over the contracted
/// pair of slots.
template <class F, class Cov>
DescPolyT<F> wick_expand(const DescPolyT<F>& p, Cov&& cov) {
  DescPolyT<F> out;
  for (const auto& t : p.terms) {
    out.terms.push_back(t);
    std::vector<std::size_t> slots;
    for (std::size_t i = 0; i < t.atom.args.size(); ++i)
      if (t.atom.args[i].is_slot) slots.push_back(i);
    if (slots.size() < 2) continue;
    if (slots.size() > 3)
      throw std::invalid_argument("wick_expand: slot degree above three is not defined");
    for (std::size_t a = 0; a < slots.size(); ++a)
      for (std::size_t b = a + 1; b < slots.size(); ++b) {
        F c = cov(t.atom.args[slots[a]].p, t.atom.args[slots[b]].p);
        for (auto& contracted : detail::contract_pair(t.atom, slots[a], slots[b]))
          out.terms.push_back({-(t.coeff * c), std::move(contracted)});
      }
  }
  return out;
}

/// Test hook: additively perturb one generator coefficient (mutation
/// sensitivity of the Ward reports).
template <class F>
void perturb_coefficient(DescPolyT<F>& p, std::size_t term, const Rat& delta) {
  if (p.terms.empty()) return;
  p.terms[term % p.terms.size()].coeff =
      p.terms[term % p.terms.size()].coeff + FieldOps<F>::from_rat(delta);
}

}  // namespace toda
