#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "toda/ratfunc.hpp"

using namespace toda;

namespace {

struct Vars {
  Context ctx;
  VarId x, y, z, t;
  Vars() {
    x = ctx.add("x", VarKind::Boundary);
    y = ctx.add("y", VarKind::Boundary);
    z = ctx.add("z", VarKind::Boundary);
    t = ctx.add("t", VarKind::Boundary);
  }
  RatFunc inv(VarId a, VarId b, int p = 1) const {  // 1/(a-b)^p
    return RatFunc::fraction(Poly::constant(1), (Poly::var(a) - Poly::var(b)).pow(unsigned(p)));
  }
};

}  // namespace

TEST_CASE("field arithmetic stays canonical") {
  Vars v;
  RatFunc f = v.inv(v.x, v.t);
  RatFunc g = v.inv(v.y, v.t);
  CHECK((f - f).is_zero());
  CHECK((f / f).equals(RatFunc::constant(1)));
  CHECK((f * g).equals(g * f));
  CHECK(((f + g) - g).equals(f));
  RatFunc sum = f + g;
  CHECK_FALSE(sum.is_zero());
  CHECK(sum.equals(v.inv(v.y, v.t) + v.inv(v.x, v.t)));
}

TEST_CASE("quotient by zero is rejected, zero numerator absorbs") {
  Vars v;
  RatFunc f = v.inv(v.x, v.y);
  CHECK_THROWS(f / RatFunc());
  CHECK((RatFunc() * f).is_zero());
  CHECK((RatFunc() + f).equals(f));
}

TEST_CASE("derivative of simple pole") {
  Vars v;
  RatFunc f = v.inv(v.x, v.t);  // 1/(x-t)
  CHECK(f.derivative(v.x).equals(-v.inv(v.x, v.t, 2)));
  CHECK(f.derivative(v.t).equals(v.inv(v.x, v.t, 2)));
  CHECK(f.derivative(v.y).is_zero());
  RatFunc g = v.inv(v.y, v.t);
  CHECK((f * g).derivative(v.x).equals(-v.inv(v.x, v.t, 2) * g));
}

TEST_CASE("derivative follows quotient rule on a composite") {
  Vars v;
  Poly x = Poly::var(v.x), y = Poly::var(v.y);
  RatFunc f = RatFunc::fraction(x * x + Poly::constant(1), (x - y) * (x + y));
  RatFunc num(x * x + Poly::constant(1));
  RatFunc den((x - y) * (x + y));
  RatFunc expect = (num.derivative(v.x) * den - num * den.derivative(v.x)) / (den * den);
  CHECK(f.derivative(v.x).equals(expect));
}

TEST_CASE("substitution folds constants and detects poles") {
  Vars v;
  RatFunc f = v.inv(v.x, v.t);
  RatFunc g = f.substitute(v.x, Poly::constant(2));
  CHECK(g.equals(RatFunc::fraction(Poly::constant(-1), Poly::var(v.t) - Poly::constant(2))));
  CHECK_THROWS_AS((void)f.substitute(v.x, Poly::var(v.t)), PoleError);
  RatFunc swapped = f.substitute(v.x, Poly::var(v.y));
  CHECK(swapped.equals(v.inv(v.y, v.t)));
}

TEST_CASE("pole order bound and laurent coefficients at a variable center") {
  Vars v;
  RatFunc f = v.inv(v.x, v.t, 3) + v.inv(v.x, v.t, 1) * v.inv(v.y, v.t, 1);
  CHECK(f.pole_order_bound(v.x, Poly::var(v.t)) == 3);
  CHECK(f.laurent_coeff(v.x, Poly::var(v.t), -3).equals(RatFunc::constant(1)));
  CHECK(f.laurent_coeff(v.x, Poly::var(v.t), -2).is_zero());
  CHECK(f.laurent_coeff(v.x, Poly::var(v.t), -1).equals(v.inv(v.y, v.t)));
  CHECK(f.laurent_coeff(v.x, Poly::var(v.t), 0).is_zero());
}

TEST_CASE("laurent coefficients of a regular function are taylor coefficients") {
  Vars v;
  // f = x^2 around x = t: (t + u)^2 = t^2 + 2tu + u^2
  RatFunc f(Poly::var(v.x).pow(2));
  CHECK(f.laurent_coeff(v.x, Poly::var(v.t), 0).equals(RatFunc(Poly::var(v.t).pow(2))));
  CHECK(f.laurent_coeff(v.x, Poly::var(v.t), 1).equals(RatFunc(Poly::var(v.t).mul_rat(Rat(2)))));
  CHECK(f.laurent_coeff(v.x, Poly::var(v.t), 2).equals(RatFunc::constant(1)));
  CHECK(f.laurent_coeff(v.x, Poly::var(v.t), 3).is_zero());
}

TEST_CASE("laurent extraction around a rational center") {
  Vars v;
  // 1/((x-1)(x-y)) around x = 1: residue is 1/(1-y)
  RatFunc f = RatFunc::fraction(Poly::constant(1),
                                (Poly::var(v.x) - Poly::constant(1)) * (Poly::var(v.x) - Poly::var(v.y)));
  RatFunc res = f.laurent_coeff(v.x, Poly::constant(1), -1);
  CHECK(res.equals(RatFunc::fraction(Poly::constant(1), Poly::constant(1) - Poly::var(v.y))));
}

TEST_CASE("laurent coefficient rejects a center containing the variable") {
  Vars v;
  RatFunc f = v.inv(v.x, v.t);
  CHECK_THROWS_AS((void)f.laurent_coeff(v.x, Poly::var(v.x), -1), std::invalid_argument);
}

TEST_CASE("check_zero produces usable witnesses") {
  Vars v;
  ZeroCheck zc = check_zero(v.inv(v.x, v.t) - v.inv(v.y, v.t), v.ctx);
  CHECK_FALSE(zc.zero);
  CHECK_FALSE(zc.witness.empty());
  CHECK(zc.value != 0);
  ZeroCheck ok = check_zero(v.inv(v.x, v.t) * v.inv(v.y, v.t) - v.inv(v.y, v.t) * v.inv(v.x, v.t),
                            v.ctx);
  CHECK(ok.zero);
}

// The three symmetrization identities that drive the pole bookkeeping of the
// local Ward identities. All are exact rational-function identities away from
// coinciding points; the levels covered match the ranges the proofs use.

TEST_CASE("two-point symmetrization identity, levels 2..12") {
  Vars v;
  for (int n = 2; n <= 12; ++n) {
    RatFunc lhs;
    for (int p = 1; p <= n - 1; ++p) lhs += v.inv(v.x, v.t, p) * v.inv(v.y, v.t, n - p);
    RatFunc rhs = v.inv(v.x, v.y) * (v.inv(v.y, v.t, n - 1) - v.inv(v.x, v.t, n - 1));
    ZeroCheck zc = check_zero(lhs - rhs, v.ctx);
    CAPTURE(n);
    CHECK(zc.zero);
  }
}

TEST_CASE("weighted two-point symmetrization identity, levels 3..12") {
  Vars v;
  for (int n = 3; n <= 12; ++n) {
    RatFunc lhs;
    for (int p = 1; p <= n - 1; ++p)
      lhs += (v.inv(v.t, v.x, p) * v.inv(v.t, v.y, n - p)).mul_rat(Rat(p - 1));
    RatFunc rhs = v.inv(v.y, v.x, 2) * (v.inv(v.t, v.y, n - 2) - v.inv(v.t, v.x, n - 2)) -
                  (v.inv(v.y, v.x) * v.inv(v.t, v.x, n - 1)).mul_rat(Rat(n - 2));
    ZeroCheck zc = check_zero(lhs - rhs, v.ctx);
    CAPTURE(n);
    CHECK(zc.zero);
  }
}

TEST_CASE("three-point symmetrization identity, levels 3..10") {
  Vars v;
  for (int n = 3; n <= 10; ++n) {
    RatFunc lhs;
    for (int p1 = 1; p1 <= n - 2; ++p1)
      for (int p2 = 1; p2 <= p1; ++p2)
        lhs += v.inv(v.t, v.x, p2) * v.inv(v.t, v.y, p1 - p2 + 1) * v.inv(v.t, v.z, n - p1 - 1);
    RatFunc rhs = v.inv(v.z, v.y) * v.inv(v.z, v.x) * v.inv(v.t, v.z, n - 2) +
                  v.inv(v.y, v.x) * v.inv(v.y, v.z) * v.inv(v.t, v.y, n - 2) +
                  v.inv(v.x, v.y) * v.inv(v.x, v.z) * v.inv(v.t, v.x, n - 2);
    ZeroCheck zc = check_zero(lhs - rhs, v.ctx);
    CAPTURE(n);
    CHECK(zc.zero);
  }
}

TEST_CASE("three-point symmetrization right side is permutation invariant") {
  Vars v;
  auto rhs = [&](VarId a, VarId b, VarId c, int n) {
    return v.inv(c, b) * v.inv(c, a) * v.inv(v.t, c, n - 2) +
           v.inv(b, a) * v.inv(b, c) * v.inv(v.t, b, n - 2) +
           v.inv(a, b) * v.inv(a, c) * v.inv(v.t, a, n - 2);
  };
  for (int n : {3, 5, 8}) {
    RatFunc base = rhs(v.x, v.y, v.z, n);
    CHECK(base.equals(rhs(v.y, v.x, v.z, n)));
    CHECK(base.equals(rhs(v.z, v.y, v.x, n)));
    CHECK(base.equals(rhs(v.y, v.z, v.x, n)));
  }
}
