#pragma once

#include "toda/descendants.hpp"

namespace toda {

/// Entry of the extended insertion list (z_1..z_N, zbar_1..zbar_N, s_1..s_M):
/// a formal point together with the weight it carries (bulk weights appear
/// twice, once at z_k and once at zbar_k; boundary weights once).
struct ExtEntry {
  VarId point;
  Weight weight;
};

/// Raised when an operation that only makes sense at vanishing charge deficit
/// is attempted on a non-neutral configuration.
struct ChargeError : std::domain_error {
  using std::domain_error::domain_error;
};

/// sum of entry weights + probe weight - 2Q, coordinatewise.
WeightT<Scalar> charge_deficit(const std::vector<ExtEntry>& entries, const Weight& probe_weight,
                               VarId gamma);

void require_neutral(const std::vector<ExtEntry>& entries, const Weight& probe_weight,
                     VarId gamma);

/// Free-field value of the slot V_p at the probe: sum_k alpha_k / (2 (x_k -
/// probe)^p) over the given entries (Gaussian integration by parts with the
/// potential switched off).
WeightT<Scalar> charge_vector(int p, VarId probe, const std::vector<ExtEntry>& others);

/// Substitute every slot of a descendant polynomial by its charge vector
/// (slot-by-slot, as Wick ordering dictates: cross-contractions between slots
/// drop out). This is the correlator-normalized value of the descendant
/// insertion at the probe. No neutrality requirement is imposed here; callers
/// verifying Ward identities must check it (require_neutral) for the result
/// to mean an insertion ratio.
RatFunc eval_formal(const DescPoly& poly, VarId probe, const std::vector<ExtEntry>& others);

/// Neutrality-checked variant: entries ++ probe must be neutral.
RatFunc eval_insertion_ratio(const DescPoly& poly, VarId probe, const Weight& probe_weight,
                             const std::vector<ExtEntry>& entries, VarId gamma);

/// Generator factory with an optional single-coefficient perturbation, the
/// mutation hook the Ward sensitivity harness uses. Target levels match the
/// generator level exactly.
struct GeneratorSet {
  VarId gamma;

  enum class Target { None, Virasoro, Spin3 };
  Target target = Target::None;
  int target_level = 0;
  std::size_t term = 0;
  Rat delta = 0;

  DescPoly vir(int n, const Weight& a) const;
  DescPoly spin(int n, const Weight& a) const;
};

/// Right-hand side of the level-n conformal Ward identity at probe t:
/// sum_k [ -L1(k)/(x_k-t)^{n-1} + (n-1) delta_k/(x_k-t)^n ], with L1(k) the
/// free-field value of the first descendant at entry k (the probe itself
/// joins the entry's insertion list). deltas[k] is the conformal weight to
/// use for entry k (closed form or unknown).
RatFunc ward_rhs_conformal(int n, VarId t, const Weight& beta, const std::vector<ExtEntry>& entries,
                           const std::vector<Scalar>& deltas, const GeneratorSet& gen);

/// Right-hand side of the level-n (n >= 3) spin-3 Ward identity:
/// sum_k [ -W2(k)/(x_k-t)^{n-2} + (n-2) W1(k)/(x_k-t)^{n-1}
///         - (n-1)(n-2) w_k/(2 (x_k-t)^n) ].
RatFunc ward_rhs_spin3(int n, VarId t, const Weight& beta, const std::vector<ExtEntry>& entries,
                       const std::vector<Scalar>& wvals, const GeneratorSet& gen);

}  // namespace toda
