#pragma once

#include <array>
#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "toda/context.hpp"

namespace toda {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

/// Exponent vector with cached total degree. Compared graded-lexicographically
/// (total degree first, then lex in the fixed context variable order), which
/// is the canonical monomial order of the whole library.
struct Mono {
  uint16_t deg = 0;
  std::array<uint8_t, Context::kMaxVars> e{};

  bool operator==(const Mono& o) const { return deg == o.deg && e == o.e; }

  // True if *this precedes o in the canonical (descending) term order.
  bool before(const Mono& o) const {
    if (deg != o.deg) return deg > o.deg;
    return std::memcmp(e.data(), o.e.data(), e.size()) > 0;
  }

  Mono operator*(const Mono& o) const {
    Mono r;
    r.deg = static_cast<uint16_t>(deg + o.deg);
    for (std::size_t i = 0; i < e.size(); ++i) {
      unsigned s = unsigned(e[i]) + unsigned(o.e[i]);
      if (s > 255) throw std::overflow_error("monomial exponent overflow");
      r.e[i] = static_cast<uint8_t>(s);
    }
    return r;
  }

  bool divides(const Mono& o) const {
    for (std::size_t i = 0; i < e.size(); ++i)
      if (e[i] > o.e[i]) return false;
    return true;
  }

  Mono quotient(const Mono& o) const {  // *this / o, assumes o.divides(*this)
    Mono r;
    r.deg = static_cast<uint16_t>(deg - o.deg);
    for (std::size_t i = 0; i < e.size(); ++i) r.e[i] = static_cast<uint8_t>(e[i] - o.e[i]);
    return r;
  }
};

struct MonoHash {
  std::size_t operator()(const Mono& m) const {
    uint64_t h = 1469598103934665603ull;
    for (uint8_t b : m.e) {
      h ^= b;
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

/// Sparse multivariate polynomial over the rationals, stored as integer
/// coefficients with one positive common denominator. Terms are kept sorted
/// in the canonical order and the content is normalized
/// (gcd(coefficients, denominator) = 1, denominator > 0), so structural
/// equality of representations coincides with mathematical equality.
class Poly {
 public:
  Poly() = default;

  static Poly zero() { return Poly(); }
  static Poly constant(const Rat& c);
  static Poly constant(long n) { return constant(Rat(n)); }
  static Poly var(VarId v, unsigned power = 1);
  /// c * prod of vars^powers
  static Poly term(const Rat& c, std::initializer_list<std::pair<VarId, unsigned>> vs);

  bool is_zero() const { return terms_.empty(); }
  bool is_constant() const { return terms_.empty() || (terms_.size() == 1 && terms_[0].first.deg == 0); }
  Rat constant_value() const;  // requires is_constant()

  std::size_t term_count() const { return terms_.size(); }
  const Int& denom() const { return den_; }
  const std::vector<std::pair<Mono, Int>>& terms() const { return terms_; }

  unsigned degree(VarId v) const;
  unsigned total_degree() const { return terms_.empty() ? 0 : terms_[0].first.deg; }
  bool depends_on(VarId v) const { return degree(v) > 0; }

  Poly operator-() const;
  Poly operator+(const Poly& o) const;
  Poly operator-(const Poly& o) const;
  Poly operator*(const Poly& o) const;
  Poly& operator+=(const Poly& o) { return *this = *this + o; }
  Poly& operator-=(const Poly& o) { return *this = *this - o; }
  Poly& operator*=(const Poly& o) { return *this = *this * o; }
  Poly mul_rat(const Rat& c) const;
  Poly pow(unsigned n) const;

  bool operator==(const Poly& o) const { return den_ == o.den_ && terms_ == o.terms_; }
  bool operator!=(const Poly& o) const { return !(*this == o); }

  /// Total order compatible with canonical term order; used to sort
  /// denominator factors deterministically.
  int compare(const Poly& o) const;

  Poly derivative(VarId v) const;

  /// Exact division; returns nullopt if o does not divide *this.
  std::optional<Poly> divide_exact(const Poly& o) const;

  /// Substitute variable v by the polynomial p (used for v -> point/var/shift).
  Poly substitute(VarId v, const Poly& p) const;
  /// Substitute v by a rational constant (fast path).
  Poly substitute(VarId v, const Rat& c) const;

  /// Evaluate at a full (or sufficient) assignment var -> rational.
  Rat evaluate(const std::unordered_map<VarId, Rat>& point) const;

  /// Collect coefficients of powers of v: result[k] has no v dependence.
  std::vector<Poly> coefficients_in(VarId v) const;

  /// Primitive part (integer content and denominator stripped, leading
  /// coefficient made positive); returns the removed rational factor c such
  /// that *this = c * primitive.
  Poly primitive_part(Rat* factor = nullptr) const;

  /// Leading coefficient sign (+1/-1; 0 for the zero polynomial).
  int lead_sign() const;

  std::string to_string(const Context& ctx) const;

  /// Internal: construct from raw parts and normalize.
  static Poly from_terms(std::vector<std::pair<Mono, Int>> terms, Int den);

 private:
  void normalize();

  // Invariants: terms sorted descending (canonical order), no zero
  // coefficients, den_ > 0, gcd(all coefficients, den_) = 1.
  std::vector<std::pair<Mono, Int>> terms_;
  Int den_ = 1;
};

}  // namespace toda
