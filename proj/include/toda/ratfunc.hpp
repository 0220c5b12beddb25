#pragma once

#include <optional>
#include <string>
#include <vector>

#include "toda/poly.hpp"

namespace toda {

/// Thrown when a substitution or evaluation hits a genuine pole.
struct PoleError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Rational function in canonical form. The denominator is kept as a multiset
/// of primitive polynomial factors with positive exponents (in this library
/// those factors are differences of point variables, powers of gamma, and the
/// occasional pivot from a linear solve). Reduction only ever attempts exact
/// division of the numerator by a denominator factor; no multivariate gcd is
/// computed. A value is zero iff its numerator is the zero polynomial, and
/// equality is decided by cross-multiplication, so both are exact.
class RatFunc {
 public:
  RatFunc() = default;
  RatFunc(Poly num) : num_(std::move(num)) {}
  static RatFunc constant(const Rat& c) { return RatFunc(Poly::constant(c)); }
  static RatFunc constant(long n) { return RatFunc(Poly::constant(n)); }
  static RatFunc var(VarId v) { return RatFunc(Poly::var(v)); }
  static RatFunc fraction(Poly num, Poly den);

  bool is_zero() const { return num_.is_zero(); }
  bool is_polynomial() const { return den_.empty(); }
  const Poly& num() const { return num_; }
  const std::vector<std::pair<Poly, int>>& den_factors() const { return den_; }
  Poly den_expanded() const;

  RatFunc operator-() const;
  RatFunc operator+(const RatFunc& o) const;
  RatFunc operator-(const RatFunc& o) const;
  RatFunc operator*(const RatFunc& o) const;
  RatFunc operator/(const RatFunc& o) const;
  RatFunc& operator+=(const RatFunc& o) { return *this = *this + o; }
  RatFunc& operator-=(const RatFunc& o) { return *this = *this - o; }
  RatFunc& operator*=(const RatFunc& o) { return *this = *this * o; }
  RatFunc& operator/=(const RatFunc& o) { return *this = *this / o; }
  RatFunc mul_rat(const Rat& c) const;
  RatFunc pow(int n) const;

  bool equals(const RatFunc& o) const { return (*this - o).is_zero(); }

  RatFunc derivative(VarId v) const;

  /// Substitute a variable by a polynomial (typically another variable or a
  /// rational constant). Throws PoleError if a denominator factor vanishes.
  RatFunc substitute(VarId v, const Poly& value) const;

  Rat evaluate(const std::unordered_map<VarId, Rat>& point) const;

  bool depends_on(VarId v) const;

  /// Largest k with (v - center)^k dividing the denominator (center must be a
  /// polynomial not involving v; in practice a variable or a constant).
  int pole_order_bound(VarId v, const Poly& center) const;

  /// Coefficient of (v - center)^order in the Laurent expansion around
  /// v = center. The result does not involve v.
  RatFunc laurent_coeff(VarId v, const Poly& center, int order) const;

  std::string to_string(const Context& ctx) const;

 private:
  void push_den_factor(const Poly& f, int k);
  void reduce();

  Poly num_;
  std::vector<std::pair<Poly, int>> den_;  // sorted by Poly::compare, exps > 0
};

/// Outcome of an exact zero test with a witness when nonzero.
struct ZeroCheck {
  bool zero = false;
  std::string witness;  // "x=2, y=3" style assignment for a nonzero value
  Rat value;            // value of the function at the witness
};

/// Decides f == 0 exactly; when nonzero, produces a rational evaluation point
/// where the function is defined and nonvanishing.
ZeroCheck check_zero(const RatFunc& f, const Context& ctx);

}  // namespace toda
