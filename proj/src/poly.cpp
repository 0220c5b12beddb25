#include "toda/poly.hpp"

#include <algorithm>
#include <sstream>

namespace toda {

using boost::multiprecision::gcd;
using boost::multiprecision::lcm;

Poly Poly::from_terms(std::vector<std::pair<Mono, Int>> terms, Int den) {
  Poly p;
  p.terms_ = std::move(terms);
  p.den_ = std::move(den);
  std::sort(p.terms_.begin(), p.terms_.end(),
            [](const auto& a, const auto& b) { return a.first.before(b.first); });
  // merge duplicates
  std::vector<std::pair<Mono, Int>> merged;
  merged.reserve(p.terms_.size());
  for (auto& t : p.terms_) {
    if (!merged.empty() && merged.back().first == t.first)
      merged.back().second += t.second;
    else
      merged.push_back(std::move(t));
  }
  p.terms_ = std::move(merged);
  p.normalize();
  return p;
}

void Poly::normalize() {
  terms_.erase(std::remove_if(terms_.begin(), terms_.end(),
                              [](const auto& t) { return t.second == 0; }),
               terms_.end());
  if (terms_.empty()) {
    den_ = 1;
    return;
  }
  if (den_ < 0) {
    den_ = -den_;
    for (auto& t : terms_) t.second = -t.second;
  }
  Int g = den_;
  for (const auto& t : terms_) {
    g = gcd(g, t.second);
    if (g == 1) break;
  }
  if (g > 1) {
    den_ /= g;
    for (auto& t : terms_) t.second /= g;
  }
}

Poly Poly::constant(const Rat& c) {
  Poly p;
  if (c != 0) {
    p.terms_.push_back({Mono{}, numerator(c)});
    p.den_ = denominator(c);
    p.normalize();
  }
  return p;
}

Poly Poly::var(VarId v, unsigned power) {
  if (power == 0) return constant(1);
  Mono m;
  if (power > 255) throw std::overflow_error("monomial exponent overflow");
  m.e[v] = static_cast<uint8_t>(power);
  m.deg = static_cast<uint16_t>(power);
  Poly p;
  p.terms_.push_back({m, Int(1)});
  return p;
}

Poly Poly::term(const Rat& c, std::initializer_list<std::pair<VarId, unsigned>> vs) {
  if (c == 0) return zero();
  Mono m;
  unsigned deg = 0;
  for (auto [v, k] : vs) {
    unsigned s = unsigned(m.e[v]) + k;
    if (s > 255) throw std::overflow_error("monomial exponent overflow");
    m.e[v] = static_cast<uint8_t>(s);
    deg += k;
  }
  m.deg = static_cast<uint16_t>(deg);
  Poly p;
  p.terms_.push_back({m, numerator(c)});
  p.den_ = denominator(c);
  p.normalize();
  return p;
}

Rat Poly::constant_value() const {
  if (terms_.empty()) return Rat(0);
  if (terms_.size() != 1 || terms_[0].first.deg != 0)
    throw std::logic_error("constant_value on non-constant polynomial");
  return Rat(terms_[0].second, den_);
}

unsigned Poly::degree(VarId v) const {
  unsigned d = 0;
  for (const auto& t : terms_) d = std::max<unsigned>(d, t.first.e[v]);
  return d;
}

Poly Poly::operator-() const {
  Poly p = *this;
  for (auto& t : p.terms_) t.second = -t.second;
  return p;
}

Poly Poly::operator+(const Poly& o) const {
  if (is_zero()) return o;
  if (o.is_zero()) return *this;
  Int l = lcm(den_, o.den_);
  Int fa = l / den_, fb = l / o.den_;
  std::vector<std::pair<Mono, Int>> out;
  out.reserve(terms_.size() + o.terms_.size());
  std::size_t i = 0, j = 0;
  while (i < terms_.size() && j < o.terms_.size()) {
    if (terms_[i].first == o.terms_[j].first) {
      Int c = terms_[i].second * fa + o.terms_[j].second * fb;
      if (c != 0) out.push_back({terms_[i].first, std::move(c)});
      ++i;
      ++j;
    } else if (terms_[i].first.before(o.terms_[j].first)) {
      out.push_back({terms_[i].first, terms_[i].second * fa});
      ++i;
    } else {
      out.push_back({o.terms_[j].first, o.terms_[j].second * fb});
      ++j;
    }
  }
  for (; i < terms_.size(); ++i) out.push_back({terms_[i].first, terms_[i].second * fa});
  for (; j < o.terms_.size(); ++j) out.push_back({o.terms_[j].first, o.terms_[j].second * fb});
  Poly p;
  p.terms_ = std::move(out);
  p.den_ = std::move(l);
  p.normalize();
  return p;
}

Poly Poly::operator-(const Poly& o) const { return *this + (-o); }

Poly Poly::operator*(const Poly& o) const {
  if (is_zero() || o.is_zero()) return zero();
  std::unordered_map<Mono, Int, MonoHash> acc;
  acc.reserve(terms_.size() * o.terms_.size() / 2 + 8);
  for (const auto& a : terms_)
    for (const auto& b : o.terms_) {
      acc[a.first * b.first] += a.second * b.second;
    }
  std::vector<std::pair<Mono, Int>> out;
  out.reserve(acc.size());
  for (auto& kv : acc)
    if (kv.second != 0) out.push_back({kv.first, std::move(kv.second)});
  return from_terms(std::move(out), den_ * o.den_);
}

Poly Poly::mul_rat(const Rat& c) const {
  if (c == 0 || is_zero()) return zero();
  Poly p = *this;
  Int cn = numerator(c);
  for (auto& t : p.terms_) t.second *= cn;
  p.den_ *= denominator(c);
  p.normalize();
  return p;
}

Poly Poly::pow(unsigned n) const {
  Poly r = constant(1);
  Poly b = *this;
  while (n) {
    if (n & 1) r *= b;
    b = (n >>= 1) ? b * b : b;
  }
  return r;
}

int Poly::compare(const Poly& o) const {
  // Order by term count, then termwise by monomial and coefficient, then
  // denominator. Any total order works; this one is cheap and deterministic.
  if (terms_.size() != o.terms_.size()) return terms_.size() < o.terms_.size() ? -1 : 1;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (!(terms_[i].first == o.terms_[i].first))
      return terms_[i].first.before(o.terms_[i].first) ? 1 : -1;
    if (terms_[i].second != o.terms_[i].second)
      return terms_[i].second < o.terms_[i].second ? -1 : 1;
  }
  if (den_ != o.den_) return den_ < o.den_ ? -1 : 1;
  return 0;
}

Poly Poly::derivative(VarId v) const {
  std::vector<std::pair<Mono, Int>> out;
  out.reserve(terms_.size());
  for (const auto& t : terms_) {
    unsigned k = t.first.e[v];
    if (k == 0) continue;
    Mono m = t.first;
    m.e[v] = static_cast<uint8_t>(k - 1);
    m.deg = static_cast<uint16_t>(m.deg - 1);
    out.push_back({m, t.second * Int(k)});
  }
  return from_terms(std::move(out), den_);
}

std::optional<Poly> Poly::divide_exact(const Poly& o) const {
  if (o.is_zero()) throw std::domain_error("division by zero polynomial");
  if (is_zero()) return zero();
  // Standard multivariate long division by the single divisor o in the
  // canonical order; succeeds iff the remainder is zero.
  Poly rem = *this;
  const Mono& lead = o.terms_[0].first;
  const Int& leadc = o.terms_[0].second;
  std::vector<std::pair<Mono, Int>> quot;
  Int qden = 1;
  while (!rem.is_zero()) {
    const Mono& rm = rem.terms_[0].first;
    if (!lead.divides(rm)) return std::nullopt;
    Mono qm = rm.quotient(lead);
    // quotient coefficient: (rem.lead / rem.den) / (leadc / o.den)
    Int qn = rem.terms_[0].second * o.den_;
    Int qd = rem.den_ * leadc;
    Int g = gcd(qn, qd);
    qn /= g;
    qd /= g;
    if (qd < 0) {
      qd = -qd;
      qn = -qn;
    }
    // accumulate quotient over common denominator
    Int l = lcm(qden, qd);
    if (l != qden) {
      Int f = l / qden;
      for (auto& t : quot) t.second *= f;
      qden = l;
    }
    quot.push_back({qm, qn * (qden / qd)});
    // rem -= (qn/qd) * x^qm * o
    Poly sub;
    sub.terms_.reserve(o.terms_.size());
    for (const auto& t : o.terms_) sub.terms_.push_back({t.first * qm, t.second * qn});
    sub.den_ = o.den_ * qd;
    sub.normalize();
    rem = rem - sub;
  }
  return from_terms(std::move(quot), std::move(qden));
}

Poly Poly::substitute(VarId v, const Poly& p) const {
  // Group by power of v, then Horner in p.
  auto coeffs = coefficients_in(v);
  Poly r = zero();
  for (std::size_t k = coeffs.size(); k-- > 0;) r = r * p + coeffs[k];
  return r;
}

Poly Poly::substitute(VarId v, const Rat& c) const {
  auto coeffs = coefficients_in(v);
  Poly r = zero();
  for (std::size_t k = coeffs.size(); k-- > 0;) r = r.mul_rat(c) + coeffs[k];
  return r;
}

Rat Poly::evaluate(const std::unordered_map<VarId, Rat>& point) const {
  Rat acc = 0;
  for (const auto& t : terms_) {
    Rat v(t.second, den_);
    for (std::size_t i = 0; i < t.first.e.size(); ++i) {
      unsigned k = t.first.e[i];
      if (k == 0) continue;
      auto it = point.find(static_cast<VarId>(i));
      if (it == point.end())
        throw std::invalid_argument("evaluate: missing assignment for a variable");
      Rat base = it->second;
      for (unsigned j = 0; j < k; ++j) v *= base;
    }
    acc += v;
  }
  return acc;
}

std::vector<Poly> Poly::coefficients_in(VarId v) const {
  unsigned d = degree(v);
  std::vector<std::vector<std::pair<Mono, Int>>> buckets(d + 1);
  for (const auto& t : terms_) {
    unsigned k = t.first.e[v];
    Mono m = t.first;
    m.e[v] = 0;
    m.deg = static_cast<uint16_t>(m.deg - k);
    buckets[k].push_back({m, t.second});
  }
  std::vector<Poly> out;
  out.reserve(d + 1);
  for (auto& b : buckets) out.push_back(from_terms(std::move(b), den_));
  return out;
}

Poly Poly::primitive_part(Rat* factor) const {
  if (is_zero()) {
    if (factor) *factor = 0;
    return zero();
  }
  Int g = 0;
  for (const auto& t : terms_) g = gcd(g, t.second);
  int sign = terms_[0].second < 0 ? -1 : 1;
  Poly p = *this;
  for (auto& t : p.terms_) t.second = t.second / g * sign;
  p.den_ = 1;
  if (factor) *factor = Rat(g * sign, den_);
  return p;
}

int Poly::lead_sign() const {
  if (terms_.empty()) return 0;
  return terms_[0].second < 0 ? -1 : 1;
}

std::string Poly::to_string(const Context& ctx) const {
  if (is_zero()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& t : terms_) {
    Rat c(t.second, den_);
    if (!first) os << (c < 0 ? " - " : " + ");
    else if (c < 0)
      os << "-";
    first = false;
    Rat a = abs(c);
    bool unit = (a == 1) && t.first.deg > 0;
    if (!unit) os << a.str();
    bool anyvar = false;
    for (std::size_t i = 0; i < t.first.e.size(); ++i) {
      unsigned k = t.first.e[i];
      if (k == 0) continue;
      if (anyvar || !unit) os << "*";
      os << ctx.name(static_cast<VarId>(i));
      if (k > 1) os << "^" << k;
      anyvar = true;
    }
  }
  return os.str();
}

}  // namespace toda
