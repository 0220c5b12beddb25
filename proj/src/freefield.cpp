#include "toda/freefield.hpp"

namespace toda {

WeightT<Scalar> charge_deficit(const std::vector<ExtEntry>& entries, const Weight& probe_weight,
                               VarId gamma) {
  Weight total = probe_weight;
  for (const auto& e : entries) total = total + e.weight;
  return total - background_charge(scalar_gamma(gamma)).scaled(Rat(2));
}

void require_neutral(const std::vector<ExtEntry>& entries, const Weight& probe_weight,
                     VarId gamma) {
  auto d = charge_deficit(entries, probe_weight, gamma);
  if (!d.a1.is_zero() || !d.a2.is_zero())
    throw ChargeError("free-field evaluation requires a neutral configuration");
}

WeightT<Scalar> charge_vector(int p, VarId probe, const std::vector<ExtEntry>& others) {
  if (p < 1) throw std::invalid_argument("charge_vector: slot order must be >= 1");
  WeightT<Scalar> acc;
  for (const auto& e : others) {
    if (e.point == probe)
      throw std::invalid_argument("charge_vector: probe must not appear among the entries");
    Poly dz = Poly::var(e.point) - Poly::var(probe);
    RatFunc kernel = RatFunc::fraction(Poly::constant(1), dz).pow(p).mul_rat(Rat(1, 2));
    acc = acc + e.weight.scaled(kernel);
  }
  return acc;
}

RatFunc eval_formal(const DescPoly& poly, VarId probe, const std::vector<ExtEntry>& others) {
  // Charge vectors depend only on the slot order; memoize across atoms.
  std::vector<WeightT<Scalar>> cache;
  auto slot_value = [&](int p) -> WeightT<Scalar> {
    if (static_cast<int>(cache.size()) < p) cache.resize(static_cast<std::size_t>(p));
    auto& cv = cache[static_cast<std::size_t>(p - 1)];
    if (cv.a1.is_zero() && cv.a2.is_zero()) cv = charge_vector(p, probe, others);
    return cv;
  };
  return eval_poly(poly, slot_value);
}

RatFunc eval_insertion_ratio(const DescPoly& poly, VarId probe, const Weight& probe_weight,
                             const std::vector<ExtEntry>& entries, VarId gamma) {
  require_neutral(entries, probe_weight, gamma);
  return eval_formal(poly, probe, entries);
}

DescPoly GeneratorSet::vir(int n, const Weight& a) const {
  DescPoly p = virasoro_poly(n, a, scalar_gamma(gamma));
  if (target == Target::Virasoro && target_level == n) perturb_coefficient(p, term, delta);
  return p;
}

DescPoly GeneratorSet::spin(int n, const Weight& a) const {
  DescPoly p = w_poly(n, a, scalar_gamma(gamma));
  if (target == Target::Spin3 && target_level == n) perturb_coefficient(p, term, delta);
  return p;
}

namespace {

// Entries seen from entry k: all the others plus the probe insertion.
std::vector<ExtEntry> viewpoint(const std::vector<ExtEntry>& entries, std::size_t k, VarId t,
                                const Weight& beta) {
  std::vector<ExtEntry> out;
  out.reserve(entries.size());
  for (std::size_t l = 0; l < entries.size(); ++l)
    if (l != k) out.push_back(entries[l]);
  out.push_back({t, beta});
  return out;
}

RatFunc inv_pow(VarId x, VarId t, int p) {
  if (p == 0) return RatFunc::constant(1);
  Poly dz = Poly::var(x) - Poly::var(t);
  return RatFunc::fraction(Poly::constant(1), dz).pow(p);
}

}  // namespace

RatFunc ward_rhs_conformal(int n, VarId t, const Weight& beta, const std::vector<ExtEntry>& entries,
                           const std::vector<Scalar>& deltas, const GeneratorSet& gen) {
  if (n < 2) throw std::invalid_argument("ward_rhs_conformal: level must be >= 2");
  if (deltas.size() != entries.size())
    throw std::invalid_argument("ward_rhs_conformal: one conformal weight per entry required");
  RatFunc rhs;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    auto view = viewpoint(entries, k, t, beta);
    RatFunc l1 = eval_formal(gen.vir(1, entries[k].weight), entries[k].point, view);
    rhs += (-l1) * inv_pow(entries[k].point, t, n - 1);
    rhs += (RatFunc::constant(n - 1) * deltas[k]) * inv_pow(entries[k].point, t, n);
  }
  return rhs;
}

RatFunc ward_rhs_spin3(int n, VarId t, const Weight& beta, const std::vector<ExtEntry>& entries,
                       const std::vector<Scalar>& wvals, const GeneratorSet& gen) {
  if (n < 3) throw std::invalid_argument("ward_rhs_spin3: level must be >= 3");
  if (wvals.size() != entries.size())
    throw std::invalid_argument("ward_rhs_spin3: one spin-3 weight per entry required");
  RatFunc rhs;
  Rat half(1, 2);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    auto view = viewpoint(entries, k, t, beta);
    RatFunc w2 = eval_formal(gen.spin(2, entries[k].weight), entries[k].point, view);
    RatFunc w1 = eval_formal(gen.spin(1, entries[k].weight), entries[k].point, view);
    rhs += (-w2) * inv_pow(entries[k].point, t, n - 2);
    rhs += (RatFunc::constant(n - 2) * w1) * inv_pow(entries[k].point, t, n - 1);
    rhs += wvals[k].mul_rat(-half * (n - 1) * (n - 2)) * inv_pow(entries[k].point, t, n);
  }
  return rhs;
}

}  // namespace toda
