#include "toda/ratfunc.hpp"

#include <algorithm>
#include <sstream>

namespace toda {

RatFunc RatFunc::fraction(Poly num, Poly den) {
  if (den.is_zero()) throw std::domain_error("rational function with zero denominator");
  RatFunc r(std::move(num));
  if (den.is_constant()) {
    r.num_ = r.num_.mul_rat(Rat(1) / den.constant_value());
    return r;
  }
  Rat content;
  Poly prim = den.primitive_part(&content);
  r.num_ = r.num_.mul_rat(Rat(1) / content);
  r.push_den_factor(prim, 1);
  r.reduce();
  return r;
}

Poly RatFunc::den_expanded() const {
  Poly d = Poly::constant(1);
  for (const auto& [f, k] : den_) d *= f.pow(static_cast<unsigned>(k));
  return d;
}

void RatFunc::push_den_factor(const Poly& f, int k) {
  if (k == 0) return;
  for (auto& [g, e] : den_)
    if (g == f) {
      e += k;
      return;
    }
  den_.push_back({f, k});
  std::sort(den_.begin(), den_.end(),
            [](const auto& a, const auto& b) { return a.first.compare(b.first) < 0; });
}

void RatFunc::reduce() {
  if (num_.is_zero()) {
    den_.clear();
    return;
  }
  for (auto& [f, k] : den_) {
    while (k > 0) {
      auto q = num_.divide_exact(f);
      if (!q) break;
      num_ = std::move(*q);
      --k;
    }
  }
  den_.erase(std::remove_if(den_.begin(), den_.end(), [](const auto& p) { return p.second == 0; }),
             den_.end());
}

RatFunc RatFunc::operator-() const {
  RatFunc r = *this;
  r.num_ = -r.num_;
  return r;
}

RatFunc RatFunc::operator+(const RatFunc& o) const {
  if (is_zero()) return o;
  if (o.is_zero()) return *this;
  // Common denominator: factor-wise max of exponents. Each numerator is
  // multiplied by its cofactor.
  RatFunc r;
  r.den_ = den_;
  for (const auto& [f, e] : o.den_) {
    bool found = false;
    for (auto& [g, k] : r.den_)
      if (g == f) {
        k = std::max(k, e);
        found = true;
        break;
      }
    if (!found) r.push_den_factor(f, e);
  }
  auto cofactor = [&r](const std::vector<std::pair<Poly, int>>& own) {
    Poly c = Poly::constant(1);
    for (const auto& [f, k] : r.den_) {
      int kown = 0;
      for (const auto& [g, e] : own)
        if (g == f) kown = e;
      if (k - kown > 0) c *= f.pow(static_cast<unsigned>(k - kown));
    }
    return c;
  };
  r.num_ = num_ * cofactor(den_) + o.num_ * cofactor(o.den_);
  r.reduce();
  return r;
}

RatFunc RatFunc::operator-(const RatFunc& o) const { return *this + (-o); }

RatFunc RatFunc::operator*(const RatFunc& o) const {
  if (is_zero() || o.is_zero()) return RatFunc();
  RatFunc r;
  r.num_ = num_ * o.num_;
  r.den_ = den_;
  for (const auto& [f, k] : o.den_) r.push_den_factor(f, k);
  r.reduce();
  return r;
}

RatFunc RatFunc::operator/(const RatFunc& o) const {
  if (o.is_zero()) throw std::domain_error("division by zero rational function");
  if (is_zero()) return RatFunc();
  RatFunc r;
  r.num_ = num_;
  for (const auto& [f, k] : o.den_) r.num_ *= f.pow(static_cast<unsigned>(k));
  r.den_ = den_;
  if (!o.num_.is_constant()) {
    Rat content;
    Poly prim = o.num_.primitive_part(&content);
    r.num_ = r.num_.mul_rat(Rat(1) / content);
    r.push_den_factor(prim, 1);
  } else {
    r.num_ = r.num_.mul_rat(Rat(1) / o.num_.constant_value());
  }
  r.reduce();
  return r;
}

RatFunc RatFunc::mul_rat(const Rat& c) const {
  if (c == 0) return RatFunc();
  RatFunc r = *this;
  r.num_ = r.num_.mul_rat(c);
  return r;
}

RatFunc RatFunc::pow(int n) const {
  if (n == 0) return constant(1);
  if (n < 0) return constant(1) / pow(-n);
  RatFunc r = constant(1);
  for (int i = 0; i < n; ++i) r *= *this;
  return r;
}

RatFunc RatFunc::derivative(VarId v) const {
  // d(n / prod f_i^{k_i}) = n'/D - sum_i k_i f_i' n / (D f_i)
  RatFunc r;
  r.num_ = num_.derivative(v);
  r.den_ = den_;
  r.reduce();
  for (const auto& [f, k] : den_) {
    Poly fp = f.derivative(v);
    if (fp.is_zero()) continue;
    RatFunc t;
    t.num_ = (num_ * fp).mul_rat(Rat(-k));
    t.den_ = den_;
    t.push_den_factor(f, 1);
    t.reduce();
    r += t;
  }
  return r;
}

RatFunc RatFunc::substitute(VarId v, const Poly& value) const {
  RatFunc r;
  r.num_ = num_.substitute(v, value);
  for (const auto& [f, k] : den_) {
    Poly fs = f.substitute(v, value);
    if (fs.is_zero()) throw PoleError("substitution hits a pole of a rational section");
    if (fs.is_constant()) {
      Rat c = fs.constant_value();
      for (int i = 0; i < k; ++i) r.num_ = r.num_.mul_rat(Rat(1) / c);
      continue;
    }
    Rat content;
    Poly prim = fs.primitive_part(&content);
    for (int i = 0; i < k; ++i) r.num_ = r.num_.mul_rat(Rat(1) / content);
    r.push_den_factor(prim, k);
  }
  r.reduce();
  return r;
}

Rat RatFunc::evaluate(const std::unordered_map<VarId, Rat>& point) const {
  Rat d = 1;
  for (const auto& [f, k] : den_) {
    Rat fv = f.evaluate(point);
    if (fv == 0) throw PoleError("evaluation hits a pole of a rational section");
    for (int i = 0; i < k; ++i) d *= fv;
  }
  return num_.evaluate(point) / d;
}

bool RatFunc::depends_on(VarId v) const {
  if (num_.depends_on(v)) return true;
  for (const auto& [f, k] : den_)
    if (f.depends_on(v)) return true;
  return false;
}

namespace {

// Multiplicity of lin inside f, with the exact cofactor left in f.
int strip_factor(Poly& f, const Poly& lin) {
  int m = 0;
  for (;;) {
    auto q = f.divide_exact(lin);
    if (!q) return m;
    f = *q;
    ++m;
  }
}

}  // namespace

int RatFunc::pole_order_bound(VarId v, const Poly& center) const {
  Poly lin = (Poly::var(v) - center).primitive_part();
  int total = 0;
  for (const auto& [f, k] : den_) {
    Poly rest = f;
    total += strip_factor(rest, lin) * k;
  }
  return total;
}

RatFunc RatFunc::laurent_coeff(VarId v, const Poly& center, int order) const {
  if (center.depends_on(v))
    throw std::invalid_argument("laurent_coeff: center must not involve the expansion variable");
  // coeff = (1/K!) d^K/dv^K [ (v-center)^p * f ] at v = center, K = p + order.
  // The stored factors are primitive; (v-center) = content * lin, so stripping
  // lin^p multiplies f by (v-center)^p / content^p and the result picks up
  // content^p. Cofactors of lin inside compound factors stay in the
  // denominator; they cannot vanish at the center or lin would divide them.
  Rat content;
  Poly lin = (Poly::var(v) - center).primitive_part(&content);
  RatFunc g = *this;
  int p = 0;
  for (auto& [f, k] : g.den_) {
    int m = strip_factor(f, lin);
    if (m == 0) continue;
    p += m * k;
    if (f.is_constant()) k = 0;
  }
  g.den_.erase(std::remove_if(g.den_.begin(), g.den_.end(),
                              [](const auto& q) { return q.second == 0; }),
               g.den_.end());
  if (order < -p) return RatFunc();
  int K = p + order;
  Rat fact = 1;
  for (int i = 1; i <= K; ++i) {
    g = g.derivative(v);
    fact *= i;
  }
  Rat scale = 1;
  for (int i = 0; i < p; ++i) scale *= content;
  return g.substitute(v, center).mul_rat(scale / fact);
}

std::string RatFunc::to_string(const Context& ctx) const {
  std::ostringstream os;
  os << "(" << num_.to_string(ctx) << ")";
  if (!den_.empty()) {
    os << " / (";
    bool first = true;
    for (const auto& [f, k] : den_) {
      if (!first) os << " * ";
      first = false;
      os << "(" << f.to_string(ctx) << ")";
      if (k > 1) os << "^" << k;
    }
    os << ")";
  }
  return os.str();
}

ZeroCheck check_zero(const RatFunc& f, const Context& ctx) {
  ZeroCheck out;
  if (f.is_zero()) {
    out.zero = true;
    return out;
  }
  // Deterministic witness sweep: staggered integer points keep the difference
  // factors of this domain away from zero on the very first attempts.
  for (int attempt = 0; attempt < 64; ++attempt) {
    std::unordered_map<VarId, Rat> pt;
    for (VarId v = 0; v < ctx.size(); ++v) {
      long base = 2 + 3L * v + 7L * attempt + (v * v % 5);
      pt[v] = Rat(base, 1 + (attempt % 3));
    }
    try {
      Rat val = f.evaluate(pt);
      if (val != 0) {
        std::ostringstream os;
        bool first = true;
        for (VarId v = 0; v < ctx.size(); ++v) {
          if (!f.depends_on(v)) continue;
          if (!first) os << ", ";
          first = false;
          os << ctx.name(v) << "=" << pt[v].str();
        }
        out.zero = false;
        out.witness = os.str();
        out.value = val;
        return out;
      }
    } catch (const PoleError&) {
      // fall through to the next attempt
    }
  }
  // The numerator is a nonzero polynomial, so some sweep point must witness
  // it; reaching this line means the sweep is too small for the degree.
  throw std::runtime_error("check_zero: witness sweep exhausted on a nonzero section");
}

}  // namespace toda
